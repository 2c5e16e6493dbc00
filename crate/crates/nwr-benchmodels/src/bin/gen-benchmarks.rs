//! Writes the bundled benchmark documents.

use std::path::PathBuf;

use clap::Parser;
use nwr::io::write_model_with_source;
use nwr_benchmodels::standard_instances;

#[derive(Parser)]
#[command(about = "Generate the bundled benchmark model documents")]
struct Args {
    /// Output directory.
    #[arg(long, default_value = "data/benchmarks")]
    out: PathBuf,
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    std::fs::create_dir_all(&args.out)?;
    for inst in standard_instances() {
        let m = inst.build();
        let path = args.out.join(format!("{}.json", inst.file_stem()));
        write_model_with_source(&m, Some(inst.source()), &path)?;
        println!("{}: {} states, {} choices", path.display(), m.num_states(), m.num_choices());
    }
    Ok(())
}
