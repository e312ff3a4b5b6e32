use std::io::{self, BufRead, Write};

use super::dispatch::Answerer;
use super::protocol::{AdapterRequest, AdapterResponse, Capabilities, Handshake, TOO_MANY_IMAGES};

/// Run the adapter side of the line protocol: write the capability
/// handshake, then answer one request per input line until EOF. Malformed
/// requests get an error response carrying the request id when one can be
/// recovered; the loop never stops on bad input.
pub fn serve_lines<R: BufRead, W: Write>(answerer: &dyn Answerer, input: R, mut output: W) -> io::Result<()> {
    let max_images = answerer.capacity();
    let handshake = Handshake {
        capabilities: Capabilities { max_images },
    };
    writeln!(output, "{}", serde_json::to_string(&handshake)?)?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = respond_to_line(answerer, max_images, &line);
        writeln!(output, "{}", serde_json::to_string(&response)?)?;
        output.flush()?;
    }
    Ok(())
}

fn respond_to_line(answerer: &dyn Answerer, max_images: Option<usize>, line: &str) -> AdapterResponse {
    let value: serde_json::Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return AdapterResponse::error(None, format!("malformed_request: {e}")),
    };
    let id = value.get("id").and_then(|v| v.as_str()).map(str::to_string);
    let req: AdapterRequest = match serde_json::from_value(value) {
        Ok(r) => r,
        Err(e) => return AdapterResponse::error(id, format!("malformed_request: {e}")),
    };
    if max_images.is_some_and(|m| req.images.len() > m) {
        return AdapterResponse::error(Some(req.id), TOO_MANY_IMAGES);
    }
    answerer.respond(&req)
}
