use clap::Parser;

fn main() {
    let cli = wedge_ldp_cli::Cli::parse();
    if let Err(e) = wedge_ldp_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
