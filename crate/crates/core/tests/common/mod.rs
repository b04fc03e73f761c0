#![allow(dead_code)]

pub mod dense_gp;
pub mod gradcheck;
