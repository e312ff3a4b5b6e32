//! Central finite-difference checks of the hand-written backward passes.

use vhaystack::neural::params::gaussian_init;
use vhaystack::neural::{grad_check, Block, LayerNorm, Module, ParamStore};
use vhaystack::retriever::model::HeadModule;
use vhaystack::retriever::{ModelConfig, Retriever};
use vhaystack::seed::rng_from_seed;

fn report<M: Module>(name: &str, m: &M, ps: &mut ParamStore, inputs: &[vhaystack::neural::Mat], out: (usize, usize)) {
    let mut rng = rng_from_seed(99);
    let coeff = gaussian_init(&mut rng, out.0, out.1);
    let r = grad_check(m, ps, inputs, &coeff, 1e-5).expect("grad check runs");
    println!(
        "{name:<15} {:>5} coordinates  max rel error {:.2e}  worst at {}",
        r.coordinates, r.max_rel_error, r.worst
    );
}

fn main() {
    let mut rng = rng_from_seed(1);
    let x = gaussian_init(&mut rng, 3, 8);
    let kv = gaussian_init(&mut rng, 5, 8);

    let mut ps = ParamStore::new();
    let ln = LayerNorm::new(&mut ps, "ln", 8);
    report("layernorm", &ln, &mut ps, std::slice::from_ref(&x), (3, 8));

    let mut ps = ParamStore::new();
    let block = Block::new(&mut ps, "block", 8, 2, 2, &mut rng);
    report("cross block", &block, &mut ps, &[x, kv], (3, 8));

    let mut cfg = ModelConfig::new(8);
    cfg.k = 4;
    let r = Retriever::new(cfg, 2);
    let query = gaussian_init(&mut rng, 1, 8);
    let tokens = gaussian_init(&mut rng, 4, 8);
    let mut ps = r.params.clone();
    report("relevance head", &HeadModule(&r), &mut ps, &[query, tokens], (1, 1));
}
