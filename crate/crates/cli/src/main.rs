use clap::Parser;

fn main() {
    let args = tunnelsim_cli::Args::parse();
    std::process::exit(tunnelsim_cli::main_with(args));
}
