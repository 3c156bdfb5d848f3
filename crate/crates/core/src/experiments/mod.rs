//! Quantitative verification harness: deterministic function families,
//! named functionals, and ratio-band studies of the quasi-norm equivalences
//! between them.
//!
//! Equivalence statements come with unquantified constants, so acceptance is
//! never an absolute number: a study measures the per-member ratio band of
//! two functionals over a family spanning scales, and passes when the spread
//! (max/min) stays under a threshold and is stable under grid refinement.
//! Every study is deterministic given (config, seed).

mod report;
mod studies;

pub use report::{field_summary, strip_timestamp, write_csv, write_field_csv, write_json, Envelope};
pub use studies::{
    aperture_study, caccioppoli_check, caccioppoli_sweep, domination_study, equivalence_study,
    equivalence_suite,
    gaffney_check, gaffney_defaults, molecule_study, pq_interval_probe, riesz_study,
    tent_domination_check, ApertureReport, BoundReport, CaccioppoliReport, CaccioppoliVariant,
    DecayFit, DominationReport, EquivalenceReport, MemberRatio, MoleculeStudyReport, PqReport,
    RefinementDrift, RieszReport, TentLemmaReport,
};

use crate::elliptic::{
    assemble, polyharmonic_coefficients, random_elliptic_coefficients, EllipticOperator,
};
use crate::funcalc::{factorize, SpectralFactorization};
use crate::functionals::{maximal_function, square_function, CutoffDescriptor, MaximalKind, SquareKind};
use crate::conegeo::TimeGrid;
use crate::hardy::generate_molecule;
use crate::lattice::{lp_quasinorm, random_bandlimited, GridFunction, TorusGrid};
use crate::numeric::subrng;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Deterministic recipe for an operator (kind, order, perturbation, seed).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct OperatorSpec {
    pub m: u32,
    pub kind: OperatorKind,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Polyharmonic,
    Random,
}

impl OperatorSpec {
    pub fn polyharmonic(m: u32) -> Self {
        OperatorSpec {
            m,
            kind: OperatorKind::Polyharmonic,
            delta: 0.0,
            seed: 0,
        }
    }

    pub fn random(m: u32, delta: f64, seed: u64) -> Self {
        OperatorSpec {
            m,
            kind: OperatorKind::Random,
            delta,
            seed,
        }
    }

    pub fn realize(&self, grid: TorusGrid) -> Result<EllipticOperator> {
        let coeffs = match self.kind {
            OperatorKind::Polyharmonic => polyharmonic_coefficients(self.m, grid)?,
            OperatorKind::Random => {
                random_elliptic_coefficients(self.m, grid, self.delta, self.seed)?
            }
        };
        assemble(&coeffs)
    }

    pub fn factorized(&self, grid: TorusGrid) -> Result<SpectralFactorization> {
        factorize(&self.realize(grid)?)
    }
}

/// One family member: a continuum recipe realized on any grid that resolves
/// it, so the same family transfers across refinements.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MemberDescriptor {
    FourierMode { k: Vec<i64> },
    GaussianBump { width: f64, center: f64 },
    RandomBandlimited { seed: u64, band: i64 },
    SmoothedIndicator { half_width: f64, smoothing: f64 },
    Molecule { seed: u64, radius: f64, vanishing_order: u32, epsilon: f64 },
}

impl MemberDescriptor {
    pub fn label(&self) -> String {
        match self {
            MemberDescriptor::FourierMode { k } => format!("mode_k{}", k[0]),
            MemberDescriptor::GaussianBump { width, .. } => format!("bump_w{width}"),
            MemberDescriptor::RandomBandlimited { seed, .. } => format!("random_s{seed}"),
            MemberDescriptor::SmoothedIndicator { half_width, .. } => {
                format!("indicator_w{half_width}")
            }
            MemberDescriptor::Molecule { seed, .. } => format!("molecule_s{seed}"),
        }
    }

    fn realize(&self, fact: &SpectralFactorization) -> Result<GridFunction> {
        let grid = fact.grid();
        let f = match self {
            MemberDescriptor::FourierMode { k } => GridFunction::fourier_mode(grid, k),
            MemberDescriptor::GaussianBump { width, center } => {
                let (w, c) = (*width, *center);
                GridFunction::from_fn(grid, |x| {
                    let mut d2 = 0.0;
                    for (a, &xa) in x.iter().enumerate() {
                        let ca = if a == 0 { c } else { 0.5 };
                        let d = (xa - ca).rem_euclid(1.0);
                        let d = d.min(1.0 - d);
                        d2 += d * d;
                    }
                    Complex64::from((-d2 / (2.0 * w * w)).exp())
                })
            }
            MemberDescriptor::RandomBandlimited { seed, band } => {
                let mut rng = subrng(*seed, "family-member");
                random_bandlimited(grid, *band, &mut rng)?
            }
            MemberDescriptor::SmoothedIndicator {
                half_width,
                smoothing,
            } => {
                let (w, s) = (*half_width, *smoothing);
                GridFunction::from_fn(grid, |x| {
                    let mut d2 = 0.0;
                    for &xa in x {
                        let d = (xa - 0.5).rem_euclid(1.0);
                        let d = d.min(1.0 - d);
                        d2 += d * d;
                    }
                    Complex64::from(1.0 / (1.0 + ((d2.sqrt() - w) / s).exp()))
                })
            }
            MemberDescriptor::Molecule {
                seed,
                radius,
                vanishing_order,
                epsilon,
            } => {
                let center = grid.total_points() / 3;
                generate_molecule(fact, center, *radius, 1.0, *vanishing_order, *epsilon, *seed)?
                    .sample
            }
        };
        Ok(f.project_mean_zero())
    }
}

/// Descriptor list plus the realized, mean-zero-projected members.
#[derive(Debug, Clone)]
pub struct FunctionFamily {
    pub descriptors: Vec<MemberDescriptor>,
    pub members: Vec<GridFunction>,
}

/// Minimum members per study.
pub const MIN_FAMILY: usize = 12;

/// Resolvable serde form of a family.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FamilySpec {
    pub members: Vec<MemberDescriptor>,
}

impl FamilySpec {
    /// The default 12-member family: four Fourier modes spanning octaves,
    /// four Gaussian bumps spanning widths, four seeded band-limited draws.
    pub fn standard(seed: u64) -> FamilySpec {
        let mut members: Vec<MemberDescriptor> = vec![];
        for k in [1i64, 2, 4, 8] {
            members.push(MemberDescriptor::FourierMode { k: vec![k, 0] });
        }
        for width in [0.05, 0.1, 0.2, 0.4] {
            members.push(MemberDescriptor::GaussianBump {
                width,
                center: 0.5,
            });
        }
        for i in 0..4u64 {
            members.push(MemberDescriptor::RandomBandlimited {
                seed: seed.wrapping_add(i),
                band: 8,
            });
        }
        FamilySpec { members }
    }

    pub fn realize(&self, fact: &SpectralFactorization) -> Result<FunctionFamily> {
        if self.members.len() < MIN_FAMILY {
            return Err(Error::param(
                "family",
                format!("need at least {MIN_FAMILY} members, got {}", self.members.len()),
            ));
        }
        let members = self
            .members
            .iter()
            .map(|d| d.realize(fact))
            .collect::<Result<Vec<_>>>()?;
        for (d, m) in self.members.iter().zip(&members) {
            if m.norm_l2() < 1e-14 {
                return Err(Error::param(
                    "family",
                    format!("member {} is zero after mean projection", d.label()),
                ));
            }
        }
        Ok(FunctionFamily {
            descriptors: self.members.clone(),
            members,
        })
    }
}

/// A named sitewise functional of the heat calculus.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "functional", rename_all = "snake_case")]
pub enum FunctionalSpec {
    SquareVertical { k: u32, aperture: f64 },
    SquareLusin { k: u32, aperture: f64 },
    MaximalRadial { aperture: f64 },
    MaximalNonTangential { aperture: f64 },
    MaximalRadialGrad { aperture: f64 },
    MaximalNonTangentialGrad { aperture: f64 },
    MaximalCutoff { aperture: f64 },
    /// the identity functional `x ↦ |f(x)|`, for Lebesgue-norm comparisons
    Lebesgue,
}

impl FunctionalSpec {
    /// Parse a CLI token (`S_L`, `S_L2`, `Sh_L`, `Sh_L1`, `N_hL`, `R_hL`,
    /// `Nt_hL`, `Rt_hL`, `Npsi_hL`, `Lp`) at a given aperture.
    pub fn parse(token: &str, aperture: f64) -> Result<Self> {
        let spec = match token {
            "S_L" => FunctionalSpec::SquareVertical { k: 1, aperture },
            "S_L2" => FunctionalSpec::SquareVertical { k: 2, aperture },
            "Sh_L" => FunctionalSpec::SquareLusin { k: 0, aperture },
            "Sh_L1" => FunctionalSpec::SquareLusin { k: 1, aperture },
            "N_hL" => FunctionalSpec::MaximalNonTangential { aperture },
            "R_hL" => FunctionalSpec::MaximalRadial { aperture },
            "Nt_hL" => FunctionalSpec::MaximalNonTangentialGrad { aperture },
            "Rt_hL" => FunctionalSpec::MaximalRadialGrad { aperture },
            "Npsi_hL" => FunctionalSpec::MaximalCutoff { aperture },
            "Lp" => FunctionalSpec::Lebesgue,
            other => {
                return Err(Error::param(
                    "functional",
                    format!(
                        "unknown functional `{other}`; expected one of S_L, S_L2, Sh_L, Sh_L1, \
                         N_hL, R_hL, Nt_hL, Rt_hL, Npsi_hL, Lp"
                    ),
                ))
            }
        };
        Ok(spec)
    }

    pub fn label(&self) -> String {
        match self {
            FunctionalSpec::SquareVertical { k, aperture } => format!("S_L[k={k},λ={aperture}]"),
            FunctionalSpec::SquareLusin { k, aperture } => format!("S_hL[k={k},λ={aperture}]"),
            FunctionalSpec::MaximalRadial { aperture } => format!("R_hL[λ={aperture}]"),
            FunctionalSpec::MaximalNonTangential { aperture } => format!("N_hL[λ={aperture}]"),
            FunctionalSpec::MaximalRadialGrad { aperture } => format!("Rt_hL[λ={aperture}]"),
            FunctionalSpec::MaximalNonTangentialGrad { aperture } => {
                format!("Nt_hL[λ={aperture}]")
            }
            FunctionalSpec::MaximalCutoff { aperture } => format!("Npsi_hL[λ={aperture}]"),
            FunctionalSpec::Lebesgue => "Lp".to_string(),
        }
    }

    /// Evaluate the sitewise functional field.
    pub fn field(
        &self,
        fact: &SpectralFactorization,
        f: &GridFunction,
        time_grid: &TimeGrid,
        cutoff: &CutoffDescriptor,
    ) -> Result<GridFunction> {
        match *self {
            FunctionalSpec::SquareVertical { k, aperture } => {
                square_function(fact, f, SquareKind::Vertical, k, aperture, time_grid)
            }
            FunctionalSpec::SquareLusin { k, aperture } => {
                square_function(fact, f, SquareKind::Lusin, k, aperture, time_grid)
            }
            FunctionalSpec::MaximalRadial { aperture } => {
                maximal_function(fact, f, MaximalKind::Radial, aperture, time_grid, None)
            }
            FunctionalSpec::MaximalNonTangential { aperture } => {
                maximal_function(fact, f, MaximalKind::NonTangential, aperture, time_grid, None)
            }
            FunctionalSpec::MaximalRadialGrad { aperture } => {
                maximal_function(fact, f, MaximalKind::RadialGrad, aperture, time_grid, None)
            }
            FunctionalSpec::MaximalNonTangentialGrad { aperture } => maximal_function(
                fact,
                f,
                MaximalKind::NonTangentialGrad,
                aperture,
                time_grid,
                None,
            ),
            FunctionalSpec::MaximalCutoff { aperture } => maximal_function(
                fact,
                f,
                MaximalKind::Cutoff,
                aperture,
                time_grid,
                Some(cutoff),
            ),
            FunctionalSpec::Lebesgue => Ok(GridFunction::from_values(
                f.grid(),
                f.values().mapv(|v| Complex64::from(v.norm())),
            )?),
        }
    }

    /// `‖Functional(f)‖_p`.
    pub fn norm(
        &self,
        fact: &SpectralFactorization,
        f: &GridFunction,
        p: f64,
        time_grid: &TimeGrid,
        cutoff: &CutoffDescriptor,
    ) -> Result<f64> {
        lp_quasinorm(&self.field(fact, f, time_grid, cutoff)?, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_grid;

    #[test]
    fn standard_family_realizes_with_12_members() {
        let g = make_grid(1, 32).unwrap();
        let fact = OperatorSpec::polyharmonic(1).factorized(g).unwrap();
        let fam = FamilySpec::standard(7).realize(&fact).unwrap();
        assert_eq!(fam.members.len(), 12);
        for m in &fam.members {
            assert!(m.norm_l2() > 1e-12);
            assert!(m.mean().norm() < 1e-12);
        }
    }

    #[test]
    fn family_transfers_across_refinement() {
        let g1 = make_grid(1, 32).unwrap();
        let g2 = make_grid(1, 64).unwrap();
        let f1 = OperatorSpec::polyharmonic(1).factorized(g1).unwrap();
        let f2 = OperatorSpec::polyharmonic(1).factorized(g2).unwrap();
        let spec = FamilySpec::standard(3);
        let fam1 = spec.realize(&f1).unwrap();
        let fam2 = spec.realize(&f2).unwrap();
        for (a, b) in fam1.members.iter().zip(&fam2.members) {
            for i in 0..g1.total_points() {
                let va = a.values()[i];
                let vb = b.values()[2 * i];
                assert!((va - vb).norm() < 1e-10, "member value drifted under refinement");
            }
        }
    }

    #[test]
    fn functional_tokens_parse() {
        for token in ["S_L", "S_L2", "Sh_L", "Sh_L1", "N_hL", "R_hL", "Nt_hL", "Rt_hL", "Npsi_hL", "Lp"] {
            assert!(FunctionalSpec::parse(token, 1.0).is_ok(), "{token}");
        }
        assert!(FunctionalSpec::parse("bogus", 1.0).is_err());
    }

    #[test]
    fn small_family_is_rejected() {
        let g = make_grid(1, 16).unwrap();
        let fact = OperatorSpec::polyharmonic(1).factorized(g).unwrap();
        let spec = FamilySpec {
            members: vec![MemberDescriptor::FourierMode { k: vec![1, 0] }],
        };
        assert!(spec.realize(&fact).is_err());
    }
}
