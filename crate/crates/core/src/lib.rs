pub mod audio;
pub mod bench;
pub mod dsp;
pub mod metrics;
pub mod mixer;
pub mod separator;
pub mod synth;
