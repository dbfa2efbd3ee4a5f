use anyhow::Result;
use ksf::diagnostics::DiagnosticsRecord;
use ksf::harness::output::{emit_csv, read_csv, records_to_csv};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_record(rng: &mut ChaCha8Rng) -> DiagnosticsRecord {
    let mut a = [0.0; 13];
    for x in &mut a {
        *x = match rng.random_range(0..4) {
            0 => rng.random::<f64>(),
            1 => f64::from_bits(rng.random::<u64>() & !(0x7ff << 52) | (rng.random_range(1..2046u64) << 52)),
            2 => -rng.random::<f64>() * 1e-300,
            _ => (rng.random::<f64>() - 0.5) * 1e12,
        };
    }
    DiagnosticsRecord::from_array(a)
}

#[test]
fn ten_thousand_rows_round_trip_bit_for_bit() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let records: Vec<_> = (0..10_000).map(|_| random_record(&mut rng)).collect();
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("nested/diagnostics.csv");
    emit_csv(&records, &path)?;
    let back = read_csv(&path)?;
    assert_eq!(back.len(), records.len());
    for (a, b) in records.iter().zip(&back) {
        let (a, b) = (a.as_array(), b.as_array());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(records_to_csv(&back), std::fs::read_to_string(&path)?);
    Ok(())
}

#[test]
fn empty_list_gives_header_only_file() -> Result<()> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("d.csv");
    emit_csv(&[], &path)?;
    let text = std::fs::read_to_string(&path)?;
    assert_eq!(text.lines().count(), 1);
    assert!(read_csv(&path)?.is_empty());
    Ok(())
}

#[test]
fn write_failure_names_the_path() {
    let err = emit_csv(&[], std::path::Path::new("/proc/ksf/forbidden.csv")).unwrap_err();
    assert!(err.to_string().contains("/proc/ksf"), "{err}");
}
