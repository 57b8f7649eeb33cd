//! Q_k Lagrange interpolation on convex quadrilaterals.
//!
//! Geometry conditions (angle conditions, regular decomposition, canonical
//! elements), the bilinear reference map, interpolants, `L^p`/`W^{m,p}` norms
//! by quadrature and the numerical studies built on them.

pub mod certificates;
pub mod experiments;
pub mod geometry;
pub mod interpolants;
pub mod ip;
pub mod norms;
pub mod quadrature;
pub mod reference_map;

use thiserror::Error;

/// Any error raised by the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Map(#[from] reference_map::MapError),
    #[error(transparent)]
    Interp(#[from] interpolants::InterpError),
    #[error(transparent)]
    Field(#[from] interpolants::FieldError),
    #[error(transparent)]
    Triangle(#[from] interpolants::TriangleError),
    #[error(transparent)]
    Norm(#[from] norms::NormError),
    #[error(transparent)]
    Certificate(#[from] certificates::CertificateError),
    #[error(transparent)]
    Experiment(#[from] experiments::ExperimentError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
