//! Multivariate Archimedean copulas through their generators.
//!
//! The crate evaluates Archimedean copulas, every uni- and multivariate
//! Markov kernel in closed form, conditional Archimedean copulas and their
//! generators, and the kernel-based dependence measure `zeta_1` together with
//! its conditional version. Numerical oracles (finite differences, quadrature,
//! Monte Carlo) live next to the closed forms so that the identities linking
//! them can be checked.

pub mod conditional;
pub mod copula;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod fmt;
pub mod generator;
pub mod kernel;
pub mod measure;
pub mod metrics;
pub mod quadrature;
pub mod roots;
pub mod sampling;
pub mod stream;

pub use conditional::ConditionalCopula;
pub use copula::{ArchimedeanCopula, Copula, FixtureCopulaB, KernelCopula};
pub use error::{Error, Result};
pub use generator::{make_generator, FamilyId, Generator, GeneratorFamily, GeneratorSpec};
pub use kernel::{KernelBranch, KernelEvaluation};
pub use quadrature::{IntegrationMethod, IntegrationSpec};
pub use sampling::SampleMatrix;
