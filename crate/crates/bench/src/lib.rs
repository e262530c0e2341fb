//! Fixtures shared by the criterion kernels.

use kacpru::kacwalk::{WalkSampler, WalkUnitary};
use kacpru::numerics::stream_rng;
use kacpru::oracles::AdversarySpec;
use kacpru::KacParams;

/// Standard-shape walk at `n` qubits from a fixed stream.
pub fn standard_walk(n: u32) -> WalkUnitary {
    let params = KacParams::standard(n).expect("valid n");
    WalkSampler::new(params).sample(&mut stream_rng(1, n as u64))
}

/// Forward-only adversary with `t` queries and one workspace qubit.
pub fn forward_spec(n: u32, t: usize) -> AdversarySpec {
    AdversarySpec::forward(n, 1, t, 7).expect("valid spec")
}
