//! Holds the `acceptance` test target, which checks the numerical acceptance
//! criteria of `fracvar` and prints one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p fracvar-validation --test acceptance`.
