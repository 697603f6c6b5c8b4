pub mod adaptive;
pub mod error;
pub mod fisher;
pub mod harness;
pub mod likelihood;
mod linalg;
pub mod model;
pub mod noise;
pub mod optim;
pub mod spectral;
