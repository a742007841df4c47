//! Builders for the benchmark systems: spin-boson, linear aggregate chains,
//! and a seven-site pigment complex read from an external parameter file.

use std::path::Path;

use crate::bath::{expand_correlation, pade_coth_terms, BathSpec, ExpansionOptions, SpectralDensity};
use crate::linalg::{C64, Op};
use crate::trajectory::{Coupling, SystemSpec};
use crate::{HopsError, Result};

pub fn sigma_x() -> Op {
    Op::from_real(2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
}

pub fn sigma_y() -> Op {
    Op::from_vec(
        2,
        vec![
            C64::new(0.0, 0.0),
            C64::new(0.0, -1.0),
            C64::new(0.0, 1.0),
            C64::new(0.0, 0.0),
        ],
    )
    .unwrap()
}

/// Convention: sigma_z |0> = +|0>.
pub fn sigma_z() -> Op {
    Op::from_real(2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
}

/// Two-level system H = -(delta/2) sigma_x + (eps/2) sigma_z coupled
/// through L = sigma_z to a single environment.
pub fn spin_boson(delta: f64, eps: f64, bath: BathSpec) -> SystemSpec {
    let h = sigma_x()
        .scaled(C64::new(-0.5 * delta, 0.0))
        .add(&sigma_z().scaled(C64::new(0.5 * eps, 0.0)));
    SystemSpec::new(h, vec![Coupling { op: sigma_z(), bath }])
        .expect("spin-boson construction is always valid")
}

/// One-exciton chain of `n` identical monomers with nearest-neighbor
/// coupling `v`, site projectors as coupling operators, one independent
/// copy of `bath` per site, and parallel transition dipoles of size `mu`.
///
/// Returns the system together with the per-site dipole vector.
pub fn linear_chain(
    n: usize,
    eps: f64,
    v: f64,
    bath: Option<BathSpec>,
    mu: f64,
) -> Result<(SystemSpec, Vec<f64>)> {
    if n == 0 {
        return Err(HopsError::InvalidInput("chain needs at least one site".into()));
    }
    let mut h = Op::zeros(n);
    for i in 0..n {
        h.set(i, i, C64::new(eps, 0.0));
        if i + 1 < n {
            h.set(i, i + 1, C64::new(v, 0.0));
            h.set(i + 1, i, C64::new(v, 0.0));
        }
    }
    let couplings = match bath {
        Some(b) => (0..n)
            .map(|i| {
                let mut l = Op::zeros(n);
                l.set(i, i, C64::new(1.0, 0.0));
                Coupling { op: l, bath: b.clone() }
            })
            .collect(),
        None => Vec::new(),
    };
    Ok((SystemSpec::new(h, couplings)?, vec![mu; n]))
}

/// Parameters of the seven-site complex as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct FmoData {
    pub dim: usize,
    pub unit: String,
    /// Row-major Hamiltonian in `unit`.
    pub hamiltonian: Vec<f64>,
    /// Per-site Drude-Lorentz bath parameters (identical sites).
    pub lambda: f64,
    pub gamma_c: f64,
    pub temperature: f64,
    pub n_pade: usize,
    pub provenance: String,
}

impl FmoData {
    pub fn parse(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut unit = None;
        let mut hamiltonian = None;
        let mut lambda = None;
        let mut gamma_c = None;
        let mut temperature = None;
        let mut n_pade = None;
        let mut provenance = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HopsError::InvalidInput(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let parse_f64 = |v: &str| -> Result<f64> {
                v.parse().map_err(|_| {
                    HopsError::InvalidInput(format!(
                        "line {}: {key}: not a number: {v:?}",
                        lineno + 1
                    ))
                })
            };
            match key {
                "dimension" => {
                    dim = Some(value.parse::<usize>().map_err(|_| {
                        HopsError::InvalidInput(format!("line {}: bad dimension", lineno + 1))
                    })?)
                }
                "unit" => unit = Some(value.to_string()),
                "hamiltonian" => {
                    let vals: Result<Vec<f64>> =
                        value.split_whitespace().map(parse_f64).collect();
                    hamiltonian = Some(vals?);
                }
                "bath.lambda" => lambda = Some(parse_f64(value)?),
                "bath.gamma_c" => gamma_c = Some(parse_f64(value)?),
                "bath.temperature" => temperature = Some(parse_f64(value)?),
                "bath.n_pade" => {
                    n_pade = Some(value.parse::<usize>().map_err(|_| {
                        HopsError::InvalidInput(format!("line {}: bad bath.n_pade", lineno + 1))
                    })?)
                }
                "provenance" => provenance = Some(value.to_string()),
                other => {
                    return Err(HopsError::InvalidInput(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        let dim = dim.ok_or_else(|| HopsError::InvalidInput("missing dimension".into()))?;
        let hamiltonian =
            hamiltonian.ok_or_else(|| HopsError::InvalidInput("missing hamiltonian".into()))?;
        if hamiltonian.len() != dim * dim {
            return Err(HopsError::InvalidInput(format!(
                "hamiltonian has {} entries, expected {}",
                hamiltonian.len(),
                dim * dim
            )));
        }
        Ok(FmoData {
            dim,
            unit: unit.unwrap_or_else(|| "dimensionless".into()),
            hamiltonian,
            lambda: lambda.ok_or_else(|| HopsError::InvalidInput("missing bath.lambda".into()))?,
            gamma_c: gamma_c
                .ok_or_else(|| HopsError::InvalidInput("missing bath.gamma_c".into()))?,
            temperature: temperature
                .ok_or_else(|| HopsError::InvalidInput("missing bath.temperature".into()))?,
            n_pade: n_pade.unwrap_or(1),
            provenance: provenance.unwrap_or_default(),
        })
    }

    /// Serialize with full float precision so a round trip is bit exact.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("dimension = {}\n", self.dim));
        s.push_str(&format!("unit = {}\n", self.unit));
        s.push_str("hamiltonian = ");
        let rows: Vec<String> = self.hamiltonian.iter().map(|x| format!("{x:?}")).collect();
        s.push_str(&rows.join(" "));
        s.push('\n');
        s.push_str(&format!("bath.lambda = {:?}\n", self.lambda));
        s.push_str(&format!("bath.gamma_c = {:?}\n", self.gamma_c));
        s.push_str(&format!("bath.temperature = {:?}\n", self.temperature));
        s.push_str(&format!("bath.n_pade = {}\n", self.n_pade));
        s.push_str(&format!("provenance = {}\n", self.provenance));
        s
    }

    /// Expand the per-site bath and assemble a SystemSpec with site
    /// projector couplings.
    pub fn build(&self, expansion: &ExpansionOptions) -> Result<SystemSpec> {
        let h = Op::from_real(self.dim, &self.hamiltonian)?;
        if !h.is_hermitian(1e-12) {
            return Err(HopsError::InvalidInput(
                "parameter file Hamiltonian is not Hermitian".into(),
            ));
        }
        let j = SpectralDensity::DrudeLorentz { lambda: self.lambda, gamma_c: self.gamma_c };
        let scheme = pade_coth_terms(self.n_pade)?;
        let expanded = expand_correlation(&j, self.temperature, &scheme, expansion)?;
        let couplings = (0..self.dim)
            .map(|i| {
                let mut l = Op::zeros(self.dim);
                l.set(i, i, C64::new(1.0, 0.0));
                Coupling { op: l, bath: expanded.bath.clone() }
            })
            .collect();
        SystemSpec::new(h, couplings)
    }
}

/// Load the seven-site benchmark from its parameter file.
pub fn fmo_from_file<P: AsRef<Path>>(path: P) -> Result<SystemSpec> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
        HopsError::InvalidInput(format!("cannot read {}: {e}", path.as_ref().display()))
    })?;
    let data = FmoData::parse(&text)?;
    // validation tolerance for the shipped demo bath; the expansion error
    // is dominated by the truncated thermal series at this Pade order
    let opts = ExpansionOptions { tau_max: 0.0, n_grid: 32, tolerance: 0.05 };
    data.build(&opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::ExpTerm;
    use approx::assert_relative_eq;

    fn demo_bath() -> BathSpec {
        BathSpec::new(
            vec![ExpTerm::new(C64::new(1.0, 0.0), C64::new(1.0, 0.0)).unwrap()],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn spin_boson_spectrum() {
        // eps = 0: eigenvalues of -(delta/2) sigma_x are -1/2 and +1/2
        let sys = spin_boson(1.0, 0.0, demo_bath());
        let (vals, _) = sys.h.hermitian_eigen();
        assert_relative_eq!(vals[0], -0.5, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 0.5, epsilon = 1e-12);
        sys.validate().unwrap();
    }

    #[test]
    fn spin_boson_zero_tunneling_is_diagonal() {
        let sys = spin_boson(0.0, 0.7, demo_bath());
        assert_eq!(sys.h.at(0, 1), C64::new(0.0, 0.0));
        assert_relative_eq!(sys.h.at(0, 0).re, 0.35);
        assert_relative_eq!(sys.h.at(1, 1).re, -0.35);
    }

    #[test]
    fn chain_eigenvalues_and_projector_couplings() {
        let (sys, dip) = linear_chain(2, 1.0, -0.3, Some(demo_bath()), 0.5).unwrap();
        let (vals, _) = sys.h.hermitian_eigen();
        assert_relative_eq!(vals[0], 0.7, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 1.3, epsilon = 1e-12);
        assert_eq!(dip, vec![0.5, 0.5]);
        assert_eq!(sys.couplings.len(), 2);
        assert_eq!(sys.couplings[1].op.at(1, 1), C64::new(1.0, 0.0));
        assert_eq!(sys.couplings[1].op.at(0, 0), C64::new(0.0, 0.0));
    }

    #[test]
    fn monomer_chain_has_no_coupling_rows() {
        let (sys, _) = linear_chain(1, 2.0, 0.0, None, 1.0).unwrap();
        assert_eq!(sys.dim(), 1);
        assert!(sys.couplings.is_empty());
    }

    #[test]
    fn fmo_file_round_trip_is_bit_exact() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/fmo_7site.dat");
        let text = std::fs::read_to_string(path).unwrap();
        let data = FmoData::parse(&text).unwrap();
        assert_eq!(data.dim, 7);
        let rewritten = data.serialize();
        let reparsed = FmoData::parse(&rewritten).unwrap();
        assert_eq!(data, reparsed);
        // the built systems agree bitwise as well
        let opts = ExpansionOptions { tau_max: 0.0, n_grid: 16, tolerance: 0.05 };
        let s1 = data.build(&opts).unwrap();
        let s2 = reparsed.build(&opts).unwrap();
        assert_eq!(s1.h, s2.h);
        for (a, b) in s1.couplings.iter().zip(&s2.couplings) {
            assert_eq!(a.op, b.op);
            assert_eq!(a.bath.terms, b.bath.terms);
        }
    }

    #[test]
    fn fmo_initial_site_population() {
        let sys = fmo_from_file(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../data/fmo_7site.dat"
        ))
        .unwrap();
        assert_eq!(sys.dim(), 7);
        sys.validate().unwrap();
        // site-1 excitation: populations at t = 0 are (1, 0, ..., 0)
        let mut psi0 = vec![C64::new(0.0, 0.0); 7];
        psi0[0] = C64::new(1.0, 0.0);
        for (i, v) in psi0.iter().enumerate() {
            let pop = v.norm_sqr();
            if i == 0 {
                assert_eq!(pop, 1.0);
            } else {
                assert_eq!(pop, 0.0);
            }
        }
    }

    #[test]
    fn malformed_fmo_file_reports_line() {
        let bad = "dimension = 2\nhamiltonian = 1 0 0\nbath.lambda = x\n";
        let err = FmoData::parse(bad).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line 3"), "{msg}");
    }
}
