//! Command-line interface: config-driven experiment runner, verification
//! suites, SVG plotting, and the objective registry listing.

pub mod config;
pub mod plot;
pub mod run;
pub mod verify;

pub use config::{parse_config, ExperimentConfig};
pub use plot::cmd_plot;
pub use run::cmd_run;
pub use verify::{cmd_verify, Suite};

use crate::objectives;

/// Honor `QHD_LAB_THREADS` by capping the rayon worker pool. Call once at
/// startup; later calls are no-ops.
pub fn init_threads() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(v) = std::env::var("QHD_LAB_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n >= 1 {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    }
}

/// Print the objective registry, one line per objective.
pub fn list_objectives() {
    for name in objectives::BUILTIN_NAMES {
        let obj = objectives::get(name).expect("builtin");
        let lo = obj.domain.lo();
        let hi = obj.domain.hi();
        println!(
            "{:<16} dim={} box=[{}, {}]^{} f_min={:.12} minimizers={}",
            obj.name,
            obj.dim,
            lo[0],
            hi[0],
            obj.dim,
            obj.f_min,
            obj.minimizers.len()
        );
    }
}
