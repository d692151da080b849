//! Associative processor emulator and analytic cost model for CNN inference
//! on CAM-based in-memory accelerators.
//!
//! The crate is layered bottom-up:
//!
//! - [`cam`]: a functional 2D CAM array with compare, selective write, reads
//!   and transfers, counting every stage in an [`EventTrace`].
//! - [`lut`]: truth-table LUT programs and their text format.
//! - [`ops`]: add, multiply, reduce, matrix product, ReLU and pooling, both
//!   emulated and as closed-form cycle counts, for 1D, 2D and segmented 2D APs.
//! - [`tech`]: SRAM and ReRAM technology profiles, energy, latency and area.
//! - [`workload`]: CNN layer shapes, im2col dimensions, MAC counts and
//!   per-layer precision configurations.
//! - [`mapper`]: execution plans for the infinite-resource and
//!   limited-resource accelerator configurations.
//! - [`sim`]: end-to-end cost reports, sweeps, peak metrics and the
//!   mixed-precision study.

pub mod bits;
pub mod cam;
pub mod error;
pub mod lut;
pub mod mapper;
pub mod ops;
pub mod sim;
pub mod tech;
pub mod trace;
pub mod workload;

pub use bits::Bits;
pub use cam::{CamArray, KeyMask, Orientation};
pub use error::{Error, Result};
pub use ops::{ApOp, ApVariant, OpResult};
pub use trace::EventTrace;
