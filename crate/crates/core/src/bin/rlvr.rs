fn main() {
    rlvr_core::cli::main()
}
