pub mod acceptance;
pub mod array;
pub mod calibration;
pub mod doa;
pub mod dsp;
pub mod error;
pub mod harness;
pub mod ldm;
pub mod plan;
pub mod rng;
pub mod sensing;
pub mod sns;
pub mod traffic;
