use clap::Parser;

fn main() {
    let args = sflow::cli::Args::parse();
    match sflow::cli::run(&args) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
