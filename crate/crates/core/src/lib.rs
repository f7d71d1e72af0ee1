//! Cantor–Moran measures built on prime-power mixed-radix schedules.
//!
//! The crate covers the whole pipeline: prime schedules and mixed-radix digits
//! ([`radix`]), multiplicative orders and the `(b, h)` digit constants
//! ([`numtheory`]), certified evaluation of Fourier moduli ([`fourier`]),
//! exhaustive verification of the digit-partition combinatorics
//! ([`distribution`]), partial sums of the Davenport–Erdős–LeVeque series
//! ([`delsum`]), exact sampling with normality and uniqueness checks
//! ([`measure`]) and gauge-function dimension diagnostics ([`dimension`]).
//!
//! Parallel work goes through [`exec::Exec`]; with the default `parallel`
//! feature batches run on rayon, otherwise everything runs sequentially with
//! identical results.

pub mod delsum;
pub mod dimension;
pub mod distribution;
pub mod exec;
pub mod fourier;
pub mod measure;
pub mod numeric;
pub mod numtheory;
pub mod primes;
pub mod radix;

/// Coarse classification of library errors, used by front ends to pick exit
/// codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    /// A precondition on the inputs was not met.
    Precondition,
    /// A certificate could not be produced or a claimed identity failed.
    Certification,
    /// A resource guard refused the request.
    ResourceGuard,
}
