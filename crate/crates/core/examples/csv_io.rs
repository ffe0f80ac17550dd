//! Files in, files out: load a table, cluster, write results, replay them.

use parclust::io::{self, read_assignments, read_merges, IdColumn, LoadOptions};
use parclust::{engine, ConstraintSet, RunConfig};

fn main() -> parclust::Result<()> {
    let dir = std::env::temp_dir().join("parclust-csv-example");
    std::fs::create_dir_all(&dir).map_err(|e| parclust::Error::Io { path: dir.clone(), source: e })?;
    let input = dir.join("cities.csv");
    std::fs::write(
        &input,
        "city,x,y\nalpha,0,0\nbeta,0.5,0.2\ngamma,9,9\ndelta,9.4,8.8\nepsilon,20,1\n",
    )
    .map_err(|e| parclust::Error::Io { path: input.clone(), source: e })?;

    let options = LoadOptions { id_column: Some(IdColumn::parse("city")), ..LoadOptions::default() };
    let data = io::load_dataset(&input, &options)?;
    let config = RunConfig {
        constraints: ConstraintSet { dmax: Some(2.0), ..ConstraintSet::none() },
        ..RunConfig::default()
    };
    let result = engine::run(&data, &config)?;
    let paths = io::write_outputs(&result, &data, &config, dir.join("out"))?;
    for path in [&paths.assignments, &paths.merges] {
        println!("--- {}", path.display());
        print!("{}", std::fs::read_to_string(path).unwrap_or_default());
    }

    let log = read_merges(&paths.merges, &data)?;
    let replayed = log.replay(data.len(), log.len())?;
    println!("replay reproduces assignments: {}", replayed == read_assignments(&paths.assignments, &data)?);
    Ok(())
}
