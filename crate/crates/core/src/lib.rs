//! Forward-mode automatic differentiation by shadow execution over a
//! VEX-like IR.

pub mod driver;
pub mod fpcodec;
pub mod frontend;
pub mod instrument;
pub mod limitation_corpus;
pub mod ir;
pub mod machine;
pub mod mathwrap;
pub mod shadowmem;
