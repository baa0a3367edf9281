//! Fixtures shared by the benchmarks.

use viscomem::kernel::{Kernel, KernelSpec};
use viscomem::solver::{DirectHistory, MemoryHistory, PronyHistory};

/// Shifted exponential kernel with a single Prony mode.
pub fn exponential_kernel() -> Kernel {
    Kernel::new(KernelSpec::shifted_exponential(0.1, 1.0)).expect("valid kernel")
}

/// A smooth gradient field on `n_cells` midpoints at step `step`.
pub fn gradient(n_cells: usize, step: usize) -> Vec<f64> {
    let t = step as f64 * 1e-3;
    (0..n_cells)
        .map(|i| {
            let x = (i as f64 + 0.5) / n_cells as f64;
            (std::f64::consts::PI * x).cos() * t.cos()
        })
        .collect()
}

/// Direct and recursive histories after `steps` pushes of the same field.
pub fn histories(n_cells: usize, steps: usize) -> (MemoryHistory, MemoryHistory) {
    let kernel = exponential_kernel();
    let dt = 0.9 / n_cells as f64;
    let a = vec![1.0; n_cells];
    let mut direct = MemoryHistory::Direct(DirectHistory::new(kernel.clone(), dt, a.clone()));
    let modes = kernel.prony_modes().expect("exponential kernel");
    let mut prony = MemoryHistory::Prony(PronyHistory::new(&modes, dt, 1.0 / n_cells as f64, a));
    for n in 0..steps {
        let g = gradient(n_cells, n);
        direct.push(&g).expect("finite kernel");
        prony.push(&g).expect("finite kernel");
    }
    (direct, prony)
}
