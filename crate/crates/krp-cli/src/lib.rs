//! File formats and report emission for the `krp` binary: KTEN dense
//! tensors, KTUK Tucker decompositions, JSON sensor models, and CSV run
//! reports with JSON sidecars.

pub mod io;
pub mod report;
