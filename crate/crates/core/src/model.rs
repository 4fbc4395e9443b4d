//! The catalog of nonholonomically coupled test systems.
//!
//! Every system splits into a passenger `x ∈ ℝⁿ` with quadratic potential
//! `U(x) = ½ xᵀK̂ᵀK̂x − fᵀx` and a one-dimensional driver `z` with potential
//! `V(z)`. The two are coupled only through the velocity constraint
//! `A(z)·ẋ = 0`, whose kernel is one-dimensional for every `z`.
//!
//! The mass matrix on `ẋ` is the identity for every catalog entry and is not
//! represented.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Identifier of a catalog system. The string forms are part of the CLI and
/// file-name interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SystemId {
    CvtHarmonic,
    CvtPendulum,
    NonholonomicParticle,
    KnifeEdge,
    VerticalDisk,
    MobileRobot,
}

impl SystemId {
    pub const ALL: [SystemId; 6] = [
        SystemId::CvtHarmonic,
        SystemId::CvtPendulum,
        SystemId::NonholonomicParticle,
        SystemId::KnifeEdge,
        SystemId::VerticalDisk,
        SystemId::MobileRobot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemId::CvtHarmonic => "cvt_harmonic",
            SystemId::CvtPendulum => "cvt_pendulum",
            SystemId::NonholonomicParticle => "nonholonomic_particle",
            SystemId::KnifeEdge => "knife_edge",
            SystemId::VerticalDisk => "vertical_disk",
            SystemId::MobileRobot => "mobile_robot",
        }
    }

    /// Whether the perturbation parameter changes the system.
    pub fn uses_epsilon(self) -> bool {
        matches!(self, SystemId::CvtPendulum | SystemId::KnifeEdge)
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for SystemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SystemId::ALL.into_iter().find(|id| id.as_str() == s).ok_or_else(|| Error::UnknownSystem(s.to_owned()))
    }
}

/// Matrix group in which the reduced flow lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupTag {
    /// Rotations of `(y₁, y₂, v)`.
    SO3,
    /// Rotations of `(y, v)`.
    SO2,
    /// Translations of `v` (no stiffness, nonzero force).
    R,
    /// Reduced flow is the identity.
    Trivial,
    /// General rigid motions (stiffness and force both present).
    SE,
}

impl GroupTag {
    pub fn from_dimensions(m: usize, has_force: bool) -> GroupTag {
        match (m, has_force) {
            (0, false) => GroupTag::Trivial,
            (0, true) => GroupTag::R,
            (_, true) => GroupTag::SE,
            (1, false) => GroupTag::SO2,
            (_, false) => GroupTag::SO3,
        }
    }
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            GroupTag::SO3 => "SO3",
            GroupTag::SO2 => "SO2",
            GroupTag::R => "R",
            GroupTag::Trivial => "trivial",
            GroupTag::SE => "SE",
        })
    }
}

/// The linear involution ρ on reduced passenger coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RhoTag {
    /// `ρ(y, v) = (y, −v)`.
    FlipV,
    /// `ρ(v) = v`.
    IdentityV,
}

impl fmt::Display for RhoTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            RhoTag::FlipV => "flip_v",
            RhoTag::IdentityV => "identity_v",
        })
    }
}

impl FromStr for RhoTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flip_v" => Ok(RhoTag::FlipV),
            "identity_v" => Ok(RhoTag::IdentityV),
            _ => Err(Error::InvalidArgument(format!("unknown rho tag `{s}`"))),
        }
    }
}

/// Immutable description of one coupled system.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    id: SystemId,
    epsilon: f64,
    n_x: usize,
    r: usize,
    stiffness: DMatrix<f64>,
    force: DVector<f64>,
    x_periodic: Vec<bool>,
    z_periodic: bool,
}

/// Passenger and driver potentials with their derivatives at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    pub u: f64,
    pub grad_u: DVector<f64>,
    pub v: f64,
    pub dv: f64,
}

/// Build a catalog system.
pub fn catalog(name: &str, epsilon: f64) -> Result<SystemSpec> {
    let id: SystemId = name.parse()?;
    SystemSpec::new(id, epsilon)
}

impl SystemSpec {
    pub fn new(id: SystemId, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!("epsilon must be finite, got {epsilon}")));
        }
        if epsilon != 0.0 && !id.uses_epsilon() {
            warn!("{id} has no perturbation; epsilon = {epsilon} is ignored");
        }
        let (n_x, r, stiffness, force, x_periodic, z_periodic) = match id {
            SystemId::CvtHarmonic => (2, 1, DMatrix::identity(2, 2), DVector::zeros(2), vec![false; 2], false),
            SystemId::CvtPendulum => (2, 1, DMatrix::identity(2, 2), DVector::zeros(2), vec![false; 2], true),
            SystemId::NonholonomicParticle => {
                (2, 1, DMatrix::from_row_slice(1, 2, &[0.0, 1.0]), DVector::zeros(2), vec![false; 2], false)
            }
            SystemId::KnifeEdge => {
                (2, 1, DMatrix::zeros(0, 2), DVector::from_column_slice(&[1.0, 0.0]), vec![false; 2], true)
            }
            SystemId::VerticalDisk | SystemId::MobileRobot => {
                (3, 2, DMatrix::zeros(0, 3), DVector::zeros(3), vec![false, false, true], true)
            }
        };
        Ok(SystemSpec { id, epsilon, n_x, r, stiffness, force, x_periodic, z_periodic })
    }

    pub fn id(&self) -> SystemId {
        self.id
    }

    pub fn name(&self) -> &'static str {
        self.id.as_str()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Perturbation actually in effect (zero for systems without one).
    fn eps(&self) -> f64 {
        if self.id.uses_epsilon() {
            self.epsilon
        } else {
            0.0
        }
    }

    /// Passenger dimension.
    pub fn n_x(&self) -> usize {
        self.n_x
    }

    /// Number of constraint rows.
    pub fn r(&self) -> usize {
        self.r
    }

    /// Rank of the stiffness factor.
    pub fn m(&self) -> usize {
        self.stiffness.nrows()
    }

    /// `K̂` with `K = K̂ᵀK̂`; shape `m × n_x`.
    pub fn stiffness_factor(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn stiffness(&self) -> DMatrix<f64> {
        self.stiffness.transpose() * &self.stiffness
    }

    pub fn force_offset(&self) -> &DVector<f64> {
        &self.force
    }

    pub fn x_periodic(&self) -> &[bool] {
        &self.x_periodic
    }

    pub fn z_periodic(&self) -> bool {
        self.z_periodic
    }

    pub fn group_tag(&self) -> GroupTag {
        GroupTag::from_dimensions(self.m(), self.force.iter().any(|&f| f != 0.0))
    }

    pub fn rho_tag(&self) -> RhoTag {
        match self.id {
            SystemId::CvtHarmonic | SystemId::CvtPendulum | SystemId::NonholonomicParticle => RhoTag::FlipV,
            _ => RhoTag::IdentityV,
        }
    }

    /// `A(z)`, shape `r × n_x`.
    pub fn constraint(&self, z: f64) -> DMatrix<f64> {
        let (s, c) = z.sin_cos();
        match self.id {
            SystemId::CvtHarmonic | SystemId::NonholonomicParticle => DMatrix::from_row_slice(1, 2, &[1.0, z]),
            SystemId::CvtPendulum => DMatrix::from_row_slice(1, 2, &[1.0, s]),
            SystemId::KnifeEdge => DMatrix::from_row_slice(1, 2, &[-s, c - self.eps()]),
            SystemId::VerticalDisk | SystemId::MobileRobot => {
                DMatrix::from_row_slice(2, 3, &[1.0, 0.0, c, 0.0, 1.0, s])
            }
        }
    }

    /// `dA/dz`, shape `r × n_x`.
    pub fn constraint_dz(&self, z: f64) -> DMatrix<f64> {
        let (s, c) = z.sin_cos();
        match self.id {
            SystemId::CvtHarmonic | SystemId::NonholonomicParticle => DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            SystemId::CvtPendulum => DMatrix::from_row_slice(1, 2, &[0.0, c]),
            SystemId::KnifeEdge => DMatrix::from_row_slice(1, 2, &[-c, -s]),
            SystemId::VerticalDisk | SystemId::MobileRobot => {
                DMatrix::from_row_slice(2, 3, &[0.0, 0.0, -s, 0.0, 0.0, c])
            }
        }
    }

    /// Driver potential `V(z)`.
    ///
    /// The pendulum driver is a hanging pendulum, `V(z) = 1 − cos z − ε sin(2z)/2`:
    /// `z = 0` is the stable equilibrium and `V(0) = 0`.
    pub fn driver_potential(&self, z: f64) -> f64 {
        match self.id {
            SystemId::CvtHarmonic | SystemId::NonholonomicParticle => 0.5 * z * z,
            SystemId::CvtPendulum => 1.0 - z.cos() - 0.5 * self.eps() * (2.0 * z).sin(),
            SystemId::KnifeEdge | SystemId::VerticalDisk => 0.0,
            SystemId::MobileRobot => z.sin(),
        }
    }

    /// `V′(z)`.
    pub fn driver_potential_dz(&self, z: f64) -> f64 {
        match self.id {
            SystemId::CvtHarmonic | SystemId::NonholonomicParticle => z,
            SystemId::CvtPendulum => z.sin() - self.eps() * (2.0 * z).cos(),
            SystemId::KnifeEdge | SystemId::VerticalDisk => 0.0,
            SystemId::MobileRobot => z.cos(),
        }
    }

    /// `V″(z)`.
    pub fn driver_potential_dzz(&self, z: f64) -> f64 {
        match self.id {
            SystemId::CvtHarmonic | SystemId::NonholonomicParticle => 1.0,
            SystemId::CvtPendulum => z.cos() + 2.0 * self.eps() * (2.0 * z).sin(),
            SystemId::KnifeEdge | SystemId::VerticalDisk => 0.0,
            SystemId::MobileRobot => -z.sin(),
        }
    }

    /// Supremum of `V` over one period of a periodic driver; `None` when the
    /// driver lives on ℝ.
    pub fn max_driver_potential(&self) -> Option<f64> {
        if !self.z_periodic {
            return None;
        }
        const SAMPLES: usize = 4096;
        let step = 2.0 * PI / SAMPLES as f64;
        let (mut best_z, mut best) = (0.0, f64::NEG_INFINITY);
        for i in 0..SAMPLES {
            let z = i as f64 * step;
            let v = self.driver_potential(z);
            if v > best {
                best = v;
                best_z = z;
            }
        }
        // Polish with Newton on V′ = 0.
        let mut z = best_z;
        for _ in 0..20 {
            let d2 = self.driver_potential_dzz(z);
            if d2 == 0.0 {
                break;
            }
            let dz = self.driver_potential_dz(z) / d2;
            if dz.abs() > step {
                break;
            }
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        Some(self.driver_potential(z).max(best))
    }
}

/// Unit vector spanning `ker A(z)`, using the closed forms of each system.
///
/// Signs: last component nonnegative for the CVT family and the rolling disk;
/// `(cos z − ε, sin z)/‖·‖` for the knife edge.
pub fn kernel_vector(spec: &SystemSpec, z: f64) -> Result<DVector<f64>> {
    let (s, c) = z.sin_cos();
    let raw = match spec.id {
        SystemId::CvtHarmonic | SystemId::NonholonomicParticle => DVector::from_column_slice(&[-z, 1.0]),
        SystemId::CvtPendulum => DVector::from_column_slice(&[-s, 1.0]),
        SystemId::KnifeEdge => DVector::from_column_slice(&[c - spec.eps(), s]),
        SystemId::VerticalDisk | SystemId::MobileRobot => DVector::from_column_slice(&[-c, -s, 1.0]),
    };
    let norm = raw.norm();
    if !(norm > 1e-12) {
        return Err(Error::SingularConstraint { z });
    }
    Ok(raw / norm)
}

/// Kernel of a generic `(n−1) × n` matrix via signed maximal minors.
///
/// The sign is chosen to agree with `reference` when given, which keeps the
/// kernel continuous along a trajectory.
pub fn numeric_kernel(a: &DMatrix<f64>, reference: Option<&DVector<f64>>) -> Result<DVector<f64>> {
    let n = a.ncols();
    if a.nrows() + 1 != n {
        return Err(Error::InvalidArgument(format!("expected an (n-1) x n matrix, got {} x {}", a.nrows(), n)));
    }
    let mut k = DVector::zeros(n);
    for i in 0..n {
        let minor = a.clone().remove_column(i);
        let det = if minor.nrows() == 0 { 1.0 } else { minor.determinant() };
        k[i] = if i % 2 == 0 { det } else { -det };
    }
    let norm = k.norm();
    let scale = a.norm().max(1.0).powi(a.nrows() as i32);
    if !(norm > 1e-12 * scale) {
        return Err(Error::SingularConstraint { z: f64::NAN });
    }
    k /= norm;
    if let Some(prev) = reference {
        if k.dot(prev) < 0.0 {
            k = -k;
        }
    }
    Ok(k)
}

/// The `(m+2) × (m+2)` generator of the reduced flow,
/// `[[0, K̂k, 0], [−(K̂k)ᵀ, 0, kᵀf], [0, 0, 0]]`, acting on `(y, v, ε)`.
pub fn reduced_matrix(spec: &SystemSpec, z: f64) -> Result<DMatrix<f64>> {
    let k = kernel_vector(spec, z)?;
    let m = spec.m();
    let kk = &spec.stiffness * &k;
    let mut l = DMatrix::zeros(m + 2, m + 2);
    for i in 0..m {
        l[(i, m)] = kk[i];
        l[(m, i)] = -kk[i];
    }
    l[(m, m + 1)] = k.dot(&spec.force);
    Ok(l)
}

pub fn potentials(spec: &SystemSpec, x: &DVector<f64>, z: f64) -> Potentials {
    let y = &spec.stiffness * x;
    let u = 0.5 * y.norm_squared() - spec.force.dot(x);
    let grad_u = spec.stiffness.transpose() * y - &spec.force;
    Potentials { u, grad_u, v: spec.driver_potential(z), dv: spec.driver_potential_dz(z) }
}
