//! Shared helpers for the acceptance suite.

pub fn pass(name: &str, detail: &str) {
    println!("ACCEPT {name}: PASS ({detail})");
}
