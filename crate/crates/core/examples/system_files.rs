//! Declarative system files: parsing, diagnostics and serialization.

use ltvpass::sysfile::{parse_system, system_to_toml};
use ltvpass::MatrixFunction;

const SYSTEM: &str = r#"
name = "damped oscillator"
interval = [0, 4]

[scenario]
x0 = [1, 0]
t0 = 0

[a]
rows = 2
cols = 2
[[a.segments]]
end = 2
entries = [["0", "1"], ["-1", "-0.5"]]
[[a.segments]]
entries = [["0", "1"], ["-(1 + (t - 2)^2)", "-0.5"]]

[b]
rows = 2
cols = 1
[[b.segments]]
constant = [[0], [1]]

[c]
rows = 1
cols = 2
[[c.segments]]
constant = [[0, 1]]

[d]
rows = 1
cols = 1
[[d.segments]]
constant = [[[0.1, 0]]]
"#;

fn main() -> ltvpass::Result<()> {
    let def = parse_system(SYSTEM, "oscillator.toml")?;
    println!("{}: n = {}, m = {}, breakpoints {:?}", def.name.as_deref().unwrap_or("unnamed"), def.system.n(), def.system.m(), def.system.breakpoints());
    println!("A(3) =\n{:.3}", def.system.a.eval(3.0)?);

    let text = system_to_toml(&def)?;
    let again = parse_system(&text, "roundtrip.toml")?;
    println!("round trip identical: {}", again.system == def.system);

    let broken = SYSTEM.replace("-(1 + (t - 2)^2)", "-(1 + (t - 2)^^2)");
    match parse_system(&broken, "oscillator.toml") {
        Err(e) => println!("diagnostic: {e}"),
        Ok(_) => println!("unexpectedly parsed"),
    }
    Ok(())
}
