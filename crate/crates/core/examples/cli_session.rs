//! Drives the command front end in-process, as the `ltvpass` binary would.

use std::io::Write;

fn main() {
    let out_dir = std::env::temp_dir().join("ltvpass-example");
    let dir = out_dir.to_str().unwrap();
    let sessions: [&[&str]; 3] = [
        &["ltvpass", "--system", "corpus:msd", "--out-dir", dir, "--format", "csv", "audit", "--trials", "20"],
        &["ltvpass", "--system", "corpus:msd-position", "audit", "--trials", "20"],
        &["ltvpass", "--system", "corpus:scalar-lti", "avstor", "--max-horizon", "4", "--max-cells", "64", "--polarize"],
    ];
    for args in sessions {
        let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
        let code = ltvpass::cli::run(args.iter().copied(), &mut stdout, &mut stderr);
        let text = String::from_utf8_lossy(&stdout);
        println!("$ {}\nexit {code}, {} bytes of output", args[1..].join(" "), text.len());
        for line in text.lines().take(4) {
            println!("  {line}");
        }
        std::io::stderr().write_all(&stderr).unwrap();
    }
    println!("files written to {}", out_dir.display());
}
