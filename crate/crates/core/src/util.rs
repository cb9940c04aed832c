//! Small shared helpers: worker-thread configuration and float formatting.

use std::sync::Once;

static POOL_INIT: Once = Once::new();

/// Worker-thread cap from `OWATTR_THREADS`; defaults to all cores.
pub fn worker_threads() -> usize {
    std::env::var("OWATTR_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Installs the global rayon pool sized by `OWATTR_THREADS`. Safe to call
/// more than once; only the first call takes effect.
pub fn init_thread_pool() {
    POOL_INIT.call_once(|| {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(worker_threads())
            .build_global();
    });
}

/// Shortest round-trip decimal representation of a float. `f64::to_string`
/// already guarantees parse(format(x)) == x for finite values.
pub fn fmt_f64(x: f64) -> String {
    x.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_round_trips() {
        for &x in &[0.1, 1.0 / 3.0, 2e-4, 1e300, -0.0, 123456.789, 5e-324] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s}");
        }
    }
}
