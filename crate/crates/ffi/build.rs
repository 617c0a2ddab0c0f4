fn main() {
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    #[cfg(feature = "gen-header")]
    {
        let dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
        let config =
            cbindgen::Config::from_file(format!("{dir}/cbindgen.toml")).expect("cbindgen.toml");
        cbindgen::Builder::new()
            .with_crate(&dir)
            .with_config(config)
            .generate()
            .expect("header generation")
            .write_to_file(format!("{dir}/include/nsdvpr.h"));
    }
}
