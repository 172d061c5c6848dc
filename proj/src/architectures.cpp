#include "tcnn/architectures.hpp"

namespace tcnn {

EncoderLayers add_encoder(Network& net, Shape4 input, const EncoderWidths& w) {
  EncoderLayers e;
  e.input = net.input("input", input);
  e.conv1 = net.conv("conv1", e.input, w.c1);
  e.pool1 = net.pool("max-pool1", e.conv1, {1, 2, 2}, {1, 2, 2});
  e.conv2 = net.conv("conv2", e.pool1, w.c2);
  e.pool2 = net.pool("max-pool2", e.conv2, {2, 2, 2}, {2, 2, 2});
  e.conv3a = net.conv("conv3a", e.pool2, w.c3);
  e.conv3b = net.conv("conv3b", e.conv3a, w.c3);
  e.pool3 = net.pool("max-pool3", e.conv3b, {2, 2, 2}, {2, 2, 2});
  e.conv4a = net.conv("conv4a", e.pool3, w.c4);
  e.conv4b = net.conv("conv4b", e.conv4a, w.c4);
  e.pool4 = net.pool("max-pool4", e.conv4b, {2, 2, 2}, {2, 2, 2});
  e.conv5a = net.conv("conv5a", e.pool4, w.c5);
  e.conv5b = net.conv("conv5b", e.conv5a, w.c5);
  return e;
}

TcnnSpec TcnnSpec::paper(int num_classes) {
  TcnnSpec s;
  s.num_classes = num_classes;
  return s;
}

StcnnSpec StcnnSpec::paper(int num_classes) {
  StcnnSpec s;
  s.num_classes = num_classes;
  return s;
}

Network build_tcnn(const TcnnSpec& spec) {
  Network net;
  const EncoderLayers e = add_encoder(net, spec.input, spec.encoder);
  net.conv("actionness", e.conv5b, spec.anchors, {1, 1, 1}, false);
  return net;
}

Network build_stcnn(const StcnnSpec& spec) {
  Network net;
  const EncoderLayers e = add_encoder(net, spec.input, spec.encoder);
  const DecoderWidths& w = spec.decoder;
  const Extent3 k{3, 3, 3};
  auto up = [&](const std::string& name, int in, int pool, int out, UpscaleFactors p) {
    return spec.upsampling == Upsampling::subpixel ? net.subpixel(name, in, out, k, p)
                                                   : net.unpool(name, in, pool, out, k, p);
  };
  const int up4 = up("upsample4", e.conv5b, e.pool4, w.up4, {2, 2, 2});
  const int c4c = net.conv("conv4c", e.conv4b, w.c4c);
  const int cat4 = net.concat("concat4", up4, c4c);
  const int up3 = up("upsample3", cat4, e.pool3, w.up3, {2, 2, 2});
  const int c3c = net.conv("conv3c", e.conv3b, w.c3c);
  const int cat3 = net.concat("concat3", up3, c3c);
  const int up2 = up("upsample2", cat3, e.pool2, w.up2, {2, 2, 2});
  const int c2c = net.conv("conv2c", e.conv2, w.c2c);
  const int cat2 = net.concat("concat2", up2, c2c);
  const int up1 = up("upsample1", cat2, e.pool1, w.up1, {1, 2, 2});
  const int c1c = net.conv("conv1c", e.conv1, w.c1c);
  const int cat1 = net.concat("concat1", up1, c1c);
  net.pixel_mlp("conv6", "conv7", cat1, w.hidden, 2);
  return net;
}

int tcnn_pair_channels(const TcnnSpec& spec) {
  return spec.encoder.c2 * spec.pair.tube.h * spec.pair.tube.w +
         spec.encoder.c5 * spec.pair.box.h * spec.pair.box.w;
}

int tcnn_recognition_inputs(const TcnnSpec& spec) {
  const Extent3 p = spec.recognition_pool;
  return spec.encoder.c2 * p.d * p.h * p.w;
}

int stcnn_recognition_inputs(const StcnnSpec& spec) {
  const Extent3 p = spec.recognition_pool;
  return (spec.decoder.up1 + spec.decoder.c1c) * p.d * p.h * p.w;
}

}  // namespace tcnn
