//! Simulation, exact model checking and PRISM export for networks of
//! refractory probabilistic leaky integrate-and-fire neurons.
pub mod dtmc;
pub mod engine;
pub mod network;
pub mod neuron;
pub mod pctl;
pub mod prismgen;
pub mod rational;
pub mod snnrf;
pub mod solve;
