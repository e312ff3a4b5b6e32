use std::path::Path;

use super::{Mat, NeuralError, ParamStore};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VHW1";

/// Serialize every tensor in insertion order.
pub fn to_bytes(ps: &ParamStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + ps.total_elements() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(ps.len() as u32).to_le_bytes());
    for id in ps.ids() {
        let name = ps.name(id).as_bytes();
        let m = ps.get(id);
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
        for v in m.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| NeuralError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
}

/// Decode a checkpoint into a fresh store.
pub fn from_bytes(bytes: &[u8]) -> Result<ParamStore, NeuralError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(NeuralError::Checkpoint("bad magic, expected VHW1".into()));
    }
    let count = r.u32()?;
    let mut ps = ParamStore::new();
    for _ in 0..count {
        let len = r.u32()?;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| NeuralError::Checkpoint("tensor name is not utf-8".into()))?
            .to_string();
        let (rows, cols) = (r.u32()?, r.u32()?);
        let payload = r.take(rows * cols * 8)?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if ps.id(&name).is_some() {
            return Err(NeuralError::Checkpoint(format!("duplicate tensor {name}")));
        }
        ps.add(name, Mat::from_vec(rows, cols, data)?);
    }
    if r.pos != bytes.len() {
        return Err(NeuralError::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(ps)
}

/// Copy values from `loaded` into `target`; names and shapes must match exactly.
pub fn restore(target: &mut ParamStore, loaded: &ParamStore) -> Result<(), NeuralError> {
    if target.len() != loaded.len() {
        return Err(NeuralError::Checkpoint(format!(
            "expected {} tensors, found {}",
            target.len(),
            loaded.len()
        )));
    }
    let ids: Vec<_> = target.ids().collect();
    for id in ids {
        let name = target.name(id).to_string();
        let src = loaded
            .id(&name)
            .ok_or_else(|| NeuralError::Checkpoint(format!("missing tensor {name}")))?;
        let src = loaded.get(src);
        if src.shape() != target.get(id).shape() {
            return Err(NeuralError::Shape {
                op: "restore",
                left: target.get(id).shape(),
                right: src.shape(),
            });
        }
        *target.get_mut(id) = src.clone();
    }
    Ok(())
}

pub fn save(ps: &ParamStore, path: impl AsRef<Path>) -> Result<(), NeuralError> {
    std::fs::write(path, to_bytes(ps)).map_err(NeuralError::Io)
}

pub fn load(path: impl AsRef<Path>) -> Result<ParamStore, NeuralError> {
    from_bytes(&std::fs::read(path).map_err(NeuralError::Io)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut ps = ParamStore::new();
        ps.add("w", Mat::from_vec(2, 1, vec![1.5, -2.0]).unwrap());
        ps.add("b", Mat::zeros(1, 3));
        ps
    }

    #[test]
    fn layout_is_stable() {
        let bytes = to_bytes(&store());
        assert_eq!(&bytes[..8], b"VHW1\x02\x00\x00\x00");
        assert_eq!(&bytes[8..13], b"\x01\x00\x00\x00w");
        assert_eq!(bytes.len(), 8 + (4 + 1 + 8 + 16) + (4 + 1 + 8 + 24));
        assert_eq!(from_bytes(&bytes).unwrap(), store());
    }

    #[test]
    fn rejects_corruption() {
        let bytes = to_bytes(&store());
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
        bad = bytes;
        bad.push(0);
        assert!(from_bytes(&bad).is_err());
    }

    #[test]
    fn restore_checks_shapes() {
        let mut t = store();
        let mut other = ParamStore::new();
        other.add("w", Mat::zeros(1, 2));
        other.add("b", Mat::zeros(1, 3));
        assert!(restore(&mut t, &other).is_err());
    }
}
