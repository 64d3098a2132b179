use clap::Parser;

fn main() {
    let cli = jscl_cli::Cli::parse();
    std::process::exit(jscl_cli::execute(&cli));
}
