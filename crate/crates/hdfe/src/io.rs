//! CSV input and output.

use std::path::Path;

use hdfe_core::{FactorIndex, FixedEffects, Matrix, ModelData};

use crate::Error;

/// A CSV file held as string columns.
#[derive(Debug, Clone)]
pub struct Table {
    headers: Vec<String>,
    columns: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, Error> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut columns = vec![Vec::new(); headers.len()];
        for record in reader.records() {
            let record = record?;
            for (c, field) in columns.iter_mut().zip(record.iter()) {
                c.push(field.to_string());
            }
        }
        Ok(Table { headers, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn column(&self, name: &str) -> Result<&[String], Error> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|j| self.columns[j].as_slice())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn numeric(&self, name: &str) -> Result<Vec<f64>, Error> {
        self.column(name)?
            .iter()
            .enumerate()
            .map(|(row, v)| v.parse::<f64>().map_err(|_| Error::Parse { column: name.to_string(), row: row + 1, value: v.clone() }))
            .collect()
    }

    pub fn factor(&self, name: &str) -> Result<FactorIndex, Error> {
        Ok(FactorIndex::from_labels(name, self.column(name)?)?)
    }

    /// Builds the estimation input from named columns.
    pub fn model_data(&self, response: &str, regressors: &[String], fixed_effects: &[String]) -> Result<ModelData, Error> {
        let y = self.numeric(response)?;
        let cols = regressors.iter().map(|r| self.numeric(r)).collect::<Result<Vec<_>, _>>()?;
        let x = Matrix::from_columns(y.len(), &cols);
        let factors = fixed_effects.iter().map(|f| self.factor(f)).collect::<Result<Vec<_>, _>>()?;
        Ok(ModelData::new(y, x, regressors.to_vec(), factors)?)
    }
}

/// Writes `y`, the regressors and the factor labels, one row per observation.
pub fn write_model_csv(path: &Path, data: &ModelData, response: &str) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![response.to_string()];
    header.extend(data.column_names.iter().cloned());
    header.extend(data.factors.iter().map(|f| f.name().to_string()));
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut row = vec![data.y[i].to_string()];
        row.extend((0..data.p()).map(|j| data.x[(i, j)].to_string()));
        row.extend(data.factors.iter().map(|f| f.labels()[f.level_of()[i]].clone()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `category, level_label, estimate`.
pub fn write_fe_csv(path: &Path, factors: &[FactorIndex], fe: &FixedEffects) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["category", "level_label", "estimate"])?;
    for (f, coef) in factors.iter().zip(&fe.coefficients) {
        for (label, v) in f.labels().iter().zip(coef) {
            w.write_record([f.name(), label.as_str(), &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
