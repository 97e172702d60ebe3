//! Hyper-Kloosterman sums, archimedean gamma factors, Voronoi kernels and
//! numerical checks of the balanced Voronoi summation formula on GL(N).

pub mod kloosterman;
pub mod modarith;
pub mod identities;
pub mod report;
pub mod coefficients;
pub mod gammafactors;
pub mod quadrature;
pub mod transforms;
pub mod voronoi;
