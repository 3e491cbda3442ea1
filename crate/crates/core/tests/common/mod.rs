#![allow(dead_code)]

pub mod gradcheck;
pub mod replay;
pub mod stoi_oracle;
pub mod toy;
