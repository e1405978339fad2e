// `!(residual <= tolerance)` is used on purpose so that NaN residuals fail.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod config;
pub mod document;
pub mod error;
pub mod linalg;
pub mod normal_form;
pub mod quadratic;
pub mod report;
pub mod scan;
pub mod spectrum;
