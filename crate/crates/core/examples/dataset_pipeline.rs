//! Generate, augment and verify datasets through the command-line front end.

use clap::Parser;
use dockaug::cli::{run, Cli};

fn dockaug(args: &[&str]) -> Result<(), Box<dyn std::error::Error>> {
    let cli = Cli::try_parse_from(std::iter::once("dockaug").chain(args.iter().copied()))?;
    print!("{}", run(&cli)?);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let src = dir.path().join("src");
    let aug = dir.path().join("aug");
    let (src, aug) = (src.to_str().unwrap(), aug.to_str().unwrap());
    dockaug(&["--seed", "1", "generate", "--sources", "2", "--out", src])?;
    dockaug(&["parse", "--dataset", src])?;
    dockaug(&["--seed", "1", "augment", "--dataset", src, "--out", aug])?;
    dockaug(&["verify", "--dataset", aug])?;
    dockaug(&["stats", "--dataset", aug])?;
    Ok(())
}
