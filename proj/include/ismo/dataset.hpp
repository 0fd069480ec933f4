#pragma once

#include <string>
#include <vector>

#include "ismo/geometry.hpp"
#include "ismo/image.hpp"
#include "ismo/render.hpp"

namespace ismo {

struct RenderingEntry {
    int state_id = 0;
    int texture_id = 0;
    int illumination_id = 0;
    int camera_id = 0;
    std::string image_path;  // relative to the dataset root
};

struct DatasetManifest {
    int num_states = 0;           // M
    int renders_per_state = 0;    // N
    int grid_size = 73;
    int image_size = 224;
    int num_textures = 0;
    int num_lights = 0;
    int num_cameras = 0;
    int unknown_texture_id = -1;  // excluded from the train split
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::string root;
    std::vector<std::string> state_paths;
    std::vector<RenderingEntry> renderings;
    std::vector<int> train_states;
    std::vector<int> test_states;
};

struct SplitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// protocol "paper": the final 20 states of every full block of 100 form the
// test set, the remainder trains. Any other protocol: proportional 4:1 with
// the final fifth as test.
void split_dataset(int num_states, const std::string& protocol, std::vector<int>& train,
                   std::vector<int>& test);

struct DatasetGenConfig {
    int states = 200;
    int textures = 4;
    int lights = 2;
    int cameras = 1;
    std::uint64_t seed = 0;
    std::string protocol = "paper";
    DeformationConfig deformation;
    RenderConfig render;
    int unknown_texture_id = 3;
};

// Generates states, renders every (texture, light, camera) combination and
// writes surfaces, images and manifest.json under out_dir.
DatasetManifest generate_dataset(const DatasetGenConfig& cfg, const std::string& out_dir);

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

struct MaskSample {
    ImageU8 image;
    Mask mask;
    int frame_index = -1;  // source frame and applied translation, for auditing
    int dx = 0, dy = 0;
};

struct MaskDatasetConfig {
    int count = 1000;
    int max_shift = 40;          // translation range in pixels
    double min_in_frame = 0.5;   // fraction of the object that must stay visible
    std::uint64_t seed = 0;
};

// Composites randomly translated foregrounds over random backgrounds; the
// mask marks exactly the composited pixels.
std::vector<MaskSample> build_mask_dataset(const std::vector<RenderedFrame>& frames,
                                           const std::vector<ImageU8>& backgrounds,
                                           const MaskDatasetConfig& cfg);

// Procedural sky / office / forest stand-in backgrounds.
std::vector<ImageU8> make_backgrounds(int count, int size, std::uint64_t seed);

}  // namespace ismo
