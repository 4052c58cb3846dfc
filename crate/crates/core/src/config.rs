/// Numeric thresholds used across the crate. Field defaults are the
/// documented contract; scenario files and callers may override them.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    /// Wronskian singularity: |W(x)| below `wronskian_rel * max(1, max row norm)`
    /// counts as singular.
    pub wronskian_rel: f64,
    /// Constant-matrix inversion: |det| at or below `singular_rel * scale^n`
    /// (scale = max row norm) counts as singular.
    pub singular_rel: f64,
    /// Residual acceptance bound for kernel, intertwining and composition checks.
    pub residual: f64,
    /// Chain verification bound.
    pub chain: f64,
    /// Relative bound below which a sampled function counts as identically zero.
    pub zero_rel: f64,
    /// Central-difference step for coefficient second derivatives.
    pub fd_step: f64,
    /// Relative defect bound for potential symmetry checks.
    pub symmetry: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            wronskian_rel: 1e-10,
            singular_rel: 1e-12,
            residual: 1e-8,
            chain: 1e-8,
            zero_rel: 1e-10,
            fd_step: 1e-5,
            symmetry: 1e-8,
        }
    }
}
