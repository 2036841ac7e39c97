//! File formats: FOA WAV, frame / metadata / metrics CSV, scene lists and plots.

pub mod plot;
pub mod scenes;
pub mod tables;
pub mod wav;

pub use plot::{plot_rows, write_plot_csv, write_svg, PlotRow};
pub use scenes::{parse_scene_file, SceneEntry};
pub use tables::{
    read_frame_csv, read_metadata_csv, read_reference_csv, write_frame_csv, write_loss_log, write_metadata_csv, write_metrics_csv, FrameTrack,
};
pub use wav::{read_foa, write_foa, ChannelOrder};
