//! Energy bookkeeping over a partitioned spectrum.

use serde::Serialize;

use crate::scalar::Scalar;
use crate::spectral::partition::SubspacePartition;

/// Per-subspace counts and energies plus the cumulative energy curve.
///
/// Index lists are 1-based to match the usual σ₁ ≥ σ₂ ≥ … numbering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    /// `[strong, weak, noise]`
    pub counts: [usize; 3],
    pub proportions: [f64; 3],
    /// `Σσᵢ² / Σσ²` per subspace.
    pub energy_fractions: [f64; 3],
    pub cumulative_energy: Vec<f64>,
    pub noise_edge: f64,
    pub strong_threshold: f64,
    pub vartheta: f64,
    pub forced_strong: bool,
    pub strong: Vec<usize>,
    pub weak: Vec<usize>,
    pub noise: Vec<usize>,
    pub sigma: Vec<f64>,
}

impl SpectralReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Two-column `index,sigma` table.
    pub fn spectrum_csv(&self) -> String {
        let mut out = String::from("index,sigma\n");
        for (i, s) in self.sigma.iter().enumerate() {
            out.push_str(&format!("{},{s:?}\n", i + 1));
        }
        out
    }

    pub fn cumulative_energy_csv(&self) -> String {
        let mut out = String::from("index,cumulative_energy\n");
        for (i, e) in self.cumulative_energy.iter().enumerate() {
            out.push_str(&format!("{},{e:?}\n", i + 1));
        }
        out
    }
}

/// Builds the report for `sigma` under `part` (lengths must agree).
pub fn spectral_report<T: Scalar>(sigma: &[T], part: &SubspacePartition<T>) -> SpectralReport {
    assert_eq!(sigma.len(), part.rank(), "partition does not match spectrum length");
    let sq: Vec<f64> = sigma.iter().map(|s| s.as_f64() * s.as_f64()).collect();
    let total: f64 = sq.iter().sum();
    let frac = |x: f64| if total > 0.0 { x / total } else { 0.0 };
    let energy = |r: std::ops::Range<usize>| frac(sq[r].iter().sum::<f64>() + 0.0);
    let r = sigma.len().max(1) as f64;
    let counts = part.counts();
    let mut running = 0.0;
    let cumulative_energy = sq
        .iter()
        .map(|&e| {
            running += e;
            frac(running)
        })
        .collect();
    let one_based = |r: std::ops::Range<usize>| r.map(|i| i + 1).collect();
    SpectralReport {
        counts,
        proportions: counts.map(|c| c as f64 / r),
        energy_fractions: [energy(part.strong()), energy(part.weak()), energy(part.noise())],
        cumulative_energy,
        noise_edge: part.noise_edge.as_f64(),
        strong_threshold: part.strong_threshold.as_f64(),
        vartheta: part.vartheta.as_f64(),
        forced_strong: part.forced_strong,
        strong: one_based(part.strong()),
        weak: one_based(part.weak()),
        noise: one_based(part.noise()),
        sigma: sigma.iter().map(|s| s.as_f64()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_values() {
        let part = SubspacePartition::from_counts(1, 1, 2, 0.5, 2.0);
        let rep = spectral_report(&[1.0, 1.0, 1.0, 1.0], &part);
        assert_eq!(rep.energy_fractions, [0.25, 0.25, 0.5]);
        assert_eq!(rep.proportions, [0.25, 0.25, 0.5]);
        assert_eq!(rep.noise, vec![3, 4]);
    }

    #[test]
    fn all_energy_first() {
        let part = SubspacePartition::from_counts(1, 0, 2, 1.0, 2.0);
        let rep = spectral_report(&[3.0, 0.0, 0.0], &part);
        assert_eq!(rep.cumulative_energy, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn json_has_documented_fields() {
        let part = SubspacePartition::from_counts(1, 0, 1, 1.0, 2.0);
        let v: serde_json::Value = serde_json::from_str(&spectral_report(&[3.0, 0.5], &part).to_json()).unwrap();
        for key in ["counts", "proportions", "energy_fractions", "cumulative_energy", "noise_edge", "strong_threshold", "vartheta"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
