//! Synthetic data, corruption, perturbation, benchmarking and the
//! verification suite.

pub mod bench;
pub mod degenerate;
pub mod inject;
pub mod oracle;
pub mod perturb;
pub mod synth;
pub mod verify;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use bench::{build_mask, run_benchmark, run_strategy, BenchItem, BenchOptions, BenchmarkReport, MaskPolicy};
pub use inject::{inject_adversarial, CorruptionSpec, InjectionFamily};
pub use perturb::{perturb, PerturbKind};
pub use synth::{synthesize, synthesize_one, Family, SynthConfig, SynthScenario, Template};
pub use verify::{verify, Property, VerifyReport};

/// Independent stream `stream` of the generator for `seed`.
pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
