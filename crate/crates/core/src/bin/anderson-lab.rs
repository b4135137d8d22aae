use clap::Parser;

fn main() {
    let cli = anderson_lab::cli::Cli::parse();
    std::process::exit(anderson_lab::cli::main_with(cli));
}
