use sparsity_audit::harness::FragileCategorical;

fn main() -> sparsity_audit::Result<()> {
    let inst = FragileCategorical::default();
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("fragile_categorical.csv"), inst.table()?.to_csv_string()?)?;
    std::fs::write(dir.join("fragile_misaligned.recipe"), inst.misaligned_recipe())?;
    Ok(())
}
