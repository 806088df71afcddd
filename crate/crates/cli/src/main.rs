use clap::Parser;

fn main() {
    let cli = nestpn::Cli::parse();
    std::process::exit(nestpn::main_with(cli));
}
