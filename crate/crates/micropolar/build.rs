//! Locates a system LAPACK for the one dense eigensolver routine we call (`zgeev_`).
//!
//! Preference order: an OpenBLAS that bundles LAPACK (checked in the usual multiarch
//! locations), then the reference `lapack`/`blas` pair. The chosen directory is baked
//! in as an rpath so binaries and tests run without loader configuration.

use std::path::Path;

fn main() {
    let candidates = [
        ("/usr/lib/x86_64-linux-gnu/openblas-pthread", "openblas"),
        ("/usr/lib/x86_64-linux-gnu/openblas-serial", "openblas"),
        ("/usr/lib/x86_64-linux-gnu", "openblas"),
        ("/usr/lib", "openblas"),
        ("/usr/lib/x86_64-linux-gnu", "lapack"),
    ];
    for (dir, lib) in candidates {
        if Path::new(dir).join(format!("lib{lib}.so")).exists() {
            println!("cargo:rustc-link-search=native={dir}");
            println!("cargo:rustc-link-lib=dylib={lib}");
            println!("cargo:rustc-link-arg=-Wl,-rpath,{dir}");
            if lib == "lapack" {
                println!("cargo:rustc-link-lib=dylib=blas");
            }
            return;
        }
    }
    panic!("no system LAPACK found (looked for libopenblas.so / liblapack.so)");
}
