//! Writes a synthetic OHLCV file in the long format `ingest` reads.
//!
//! cargo run -p kdlab --example generate_dataset -- <out.csv> [assets] [dates] [seed]

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args.first().ok_or("usage: generate_dataset <out.csv> [assets] [dates] [seed]")?;
    let assets = args.get(1).map_or(Ok(5), |s| s.parse())?;
    let dates = args.get(2).map_or(Ok(750), |s| s.parse())?;
    let seed = args.get(3).map_or(Ok(7), |s| s.parse())?;
    let panel = kdlab::synthetic::synthetic_ohlcv(assets, dates, seed)?;
    kdlab::market_data::save_panel_csv(&panel, out)?;
    println!("{} assets, {} dates -> {out}", panel.n_assets(), panel.n_dates());
    Ok(())
}
