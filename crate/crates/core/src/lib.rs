//! Simulation of asynchronous AER output arbitration and a self-timed CAM.
//!
//! * [`kernel`]: discrete-event core, traces and four-phase handshakes.
//! * [`arbitration`]: five arbiter architectures, analytic and simulated.
//! * [`pipeline`]: the HAT encoding pipeline and its timing checks.
//! * [`cam`]: the self-timed CAM with its completion schemes and energy model.
//! * [`report`]: tables, sweeps, the CAM ablation report and the end-to-end demo.
//! * [`workloads`]: seeded spike generators.
//! * [`rng`]: the portable PRNG every stochastic draw goes through.

pub mod arbitration;
pub mod cam;
pub mod kernel;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod stats;
pub mod workloads;
