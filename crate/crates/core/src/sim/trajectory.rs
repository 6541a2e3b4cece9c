use std::io::Write;

use super::WorldState;

/// Line-oriented world dump: `time_index,id,x,y,v_x,v_y,lane`, one row per vehicle.
pub struct TrajectoryWriter<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(inner: W) -> crate::Result<Self> {
        let mut out = csv::Writer::from_writer(inner);
        out.write_record(["time_index", "id", "x", "y", "v_x", "v_y", "lane"])?;
        Ok(Self { out })
    }

    pub fn record(&mut self, world: &WorldState) -> crate::Result<()> {
        for v in &world.vehicles {
            self.out.write_record([
                world.time_index.to_string(),
                v.id.to_string(),
                v.x.to_string(),
                v.y.to_string(),
                v.v_x.to_string(),
                v.v_y.to_string(),
                v.lane.to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> crate::Result<W> {
        self.out.into_inner().map_err(|e| crate::Error::Io(e.into_error()))
    }
}
