fn main() {
    std::process::exit(irony_agents::cli::main());
}
