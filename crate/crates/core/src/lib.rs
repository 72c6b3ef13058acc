//! Analytics for AED-retrieval trips recorded by a smartphone.
//!
//! The crate is organised as a batch pipeline:
//!
//! * [`sensorlog`] ingests the per-trip CSV streams, the AED/building
//!   registry and the trip manifest.
//! * [`dsp`] resamples IMU streams to 20 Hz, cuts 2 s windows and extracts an
//!   18-dimensional feature vector per window.
//! * [`pausenet`] trains and applies the moving / exploratory-pausing SVM.
//! * [`tripseg`] splits a trip into Preparation, Building Search and Indoor AED
//!   Search and measures the total and pause durations.
//! * [`metrics`] turns pre/post exam trips into per-participant outcomes and
//!   evaluates the survival curve shown in the app.
//! * [`stats`] holds the nonparametric tests and estimators used by reports.
//! * [`simtrip`] synthesises labelled multimodal traces with known ground truth.
//! * [`session`] replays the exam / routine-session flow as a state machine.

pub mod dsp;
pub mod io;
pub mod metrics;
pub mod pausenet;
pub mod report;
pub mod sensorlog;
pub mod session;
pub mod simtrip;
pub mod stats;
pub mod tripseg;

mod warning;

pub use warning::Warning;

/// Milliseconds since the Unix epoch.
pub type TimestampMs = i64;
