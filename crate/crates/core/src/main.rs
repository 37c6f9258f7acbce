fn main() {
    std::process::exit(consensus_lab::cli::main());
}
