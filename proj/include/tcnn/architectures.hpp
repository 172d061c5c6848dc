#pragma once

// The two convolutional trunks. `paper()` specs give the full-size layer
// widths; the harness uses narrower desk-scale widths with the same wiring.

#include "tcnn/graph.hpp"
#include "tcnn/proposals.hpp"

namespace tcnn {

struct EncoderWidths {
  int c1 = 64, c2 = 128, c3 = 256, c4 = 512, c5 = 512;
};

/// Layer ids of the shared 3D encoder.
struct EncoderLayers {
  int input = 0, conv1 = 0, pool1 = 0, conv2 = 0, pool2 = 0, conv3a = 0, conv3b = 0, pool3 = 0,
      conv4a = 0, conv4b = 0, pool4 = 0, conv5a = 0, conv5b = 0;
};

/// conv1 .. conv5b: 3x3x3 same-padded convolutions with ReLU, a 1x2x2 first
/// pool and 2x2x2 pools after.
EncoderLayers add_encoder(Network& net, Shape4 input, const EncoderWidths& w);

struct TcnnSpec {
  Shape4 input{3, 8, 300, 400};
  EncoderWidths encoder;
  int anchors = 12;
  PairDims pair;
  int projection = 1024;  // 1x1 projection channels per frame
  std::vector<int> regression_hidden{4096, 4096};
  Extent3 recognition_pool{8, 4, 4};
  std::vector<int> recognition_hidden{4096, 4096};
  int num_classes = 10;

  static TcnnSpec paper(int num_classes);
};

/// Encoder plus a 1x1 actionness map ("actionness") with one logit per
/// anchor on conv5b.
Network build_tcnn(const TcnnSpec& spec);

enum class Upsampling { subpixel, unpool };

struct DecoderWidths {
  int up4 = 64, c4c = 448, up3 = 64, c3c = 448, up2 = 64, c2c = 128, up1 = 48, c1c = 64;
  int hidden = 4096;
};

struct StcnnSpec {
  Shape4 input{3, 8, 240, 320};
  EncoderWidths encoder;
  DecoderWidths decoder;
  Upsampling upsampling = Upsampling::subpixel;
  Extent3 recognition_pool{8, 8, 8};
  std::vector<int> recognition_hidden{4096, 4096};
  int num_classes = 10;

  static StcnnSpec paper(int num_classes);
};

/// Encoder, decoder upsample4 .. conv1c with concatenated skips
/// (concat_k = [upsample_k, conv_kc]) and the per-voxel segmentation head
/// conv6 / conv7.
Network build_stcnn(const StcnnSpec& spec);

/// Input length of the recognition head of each model.
int tcnn_recognition_inputs(const TcnnSpec& spec);
int stcnn_recognition_inputs(const StcnnSpec& spec);
/// Per-frame channel count of the paired tube/box descriptor.
int tcnn_pair_channels(const TcnnSpec& spec);

}  // namespace tcnn
