//! Holds the `acceptance` test target, which checks the library end to end
//! and prints one line per criterion. Run it alone with
//! `cargo test -p depsched-tests --test acceptance`.
