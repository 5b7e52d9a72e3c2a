fn main() {
    std::process::exit(tsn_iot_sim::cli::main());
}
