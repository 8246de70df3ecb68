//! Branch-and-bound certification of a lower bound on `f/g` over canonical
//! configurations.

pub mod audit;
pub mod boxes;
pub mod lp;
pub mod model;
pub mod search;

pub use audit::{audit_certificate, AuditOutcome};
pub use boxes::{ConfigBox, Interval};
pub use model::{lp_feasible, ratio_bound_holds, LpVerdict, RatioVerdict};
pub use search::{
    certify, parse_log, parse_log_params, write_log, CertifyOutcome, CertifyParams, CertifyStatus, CubeRecord, Reason,
};

/// `(1 − δ′/(2(1−δ′)))·ρ`: the guarantee after rebalancing, given a
/// certified ratio `ρ` on edges with `g ≥ δ′`.
pub fn composed_bound(rho: f64, delta_prime: f64) -> f64 {
    (1.0 - delta_prime / (2.0 * (1.0 - delta_prime))) * rho
}

#[cfg(test)]
mod tests {
    #[test]
    fn composed_bound_value() {
        let v = super::composed_bound(0.80, 0.01);
        assert!((v - 0.795_959_595_959_596).abs() < 1e-15);
        assert!(v >= 0.795);
    }
}
