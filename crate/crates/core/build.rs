fn main() {
    // System OpenBLAS bundles LAPACK (zheevd/dsyevd and friends).
    println!("cargo:rustc-link-lib=dylib=openblas");
}
