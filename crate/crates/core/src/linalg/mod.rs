pub mod banded;
pub mod dense;
