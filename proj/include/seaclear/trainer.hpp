#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "seaclear/adam.hpp"
#include "seaclear/deblur_net.hpp"
#include "seaclear/imaging.hpp"
#include "seaclear/layers.hpp"
#include "seaclear/stn.hpp"
#include "seaclear/transmission_net.hpp"

namespace seaclear {

/// Hyperparameters shared by both experiments. Defaults are the desk-scale
/// profile; TrainConfig::full() gives the full-size training schedule.
struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 60;
  double dropout_rate = 0.0;
  double lambda_dcp = 0.1;
  int patch = 7;
  std::uint64_t seed = 42;
  int image_size = 64;
  int num_images = 64;

  static TrainConfig desk() { return {}; }
  static TrainConfig full();

  /// Throws ParameterError naming the first offending field.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// ---------------------------------------------------------------- losses

struct ReconstructionLoss {
  double frobenius = 0.0;  // ‖I_rec - I_ori‖_F, the reported metric
  double mse = 0.0;        // squared norm / element count, the training objective
  Grid grad;               // d mse / d I_rec
};

ReconstructionLoss reconstruction_loss(const Grid& reconstructed, const Grid& original);

struct TotalLoss {
  double reconstruction = 0.0;  // Frobenius norm
  double reconstruction_mse = 0.0;
  double dcp = 0.0;
  double total = 0.0;  // reconstruction_mse + lambda_dcp · dcp
  Grid grad_clear;
  Grid grad_transmission;
};

TotalLoss total_loss(const Grid& original, const Grid& clear_pred, const Grid& t_pred,
                     const BackgroundLight& A, const TrainConfig& config);

/// 10·log10(1 / MSE) for signals on a unit peak, capped at 100 dB.
double psnr(const Grid& pred, const Grid& truth);

// -------------------------------------------------------------- datasets

struct UnderwaterSample {
  Grid clear;
  Grid depth;
  Grid hazy;
  Grid transmission;  // one channel per image channel
  BackgroundLight background;
  AttenuationCoeff beta;
};

std::vector<UnderwaterSample> gen_underwater_dataset(int n, int size, std::uint64_t seed);

enum class ShapeClass { square = 0, triangle = 1, disc = 2 };
inline constexpr int kShapeClasses = 3;

struct ShapeSample {
  Grid image;  // one channel
  int label = 0;
};

/// Renders n shapes with labels cycling square, triangle, disc, then
/// shuffles the order. With `distort` each image is warped by a random
/// homography.
std::vector<ShapeSample> gen_shapes_dataset(int n, int size, bool distort, std::uint64_t seed);

// ------------------------------------------------------------- extractor

/// Shared feature extractor: 3×3 convs with 8, 16, 32 channels, relu,
/// stride 1 then 2 then 2.
struct ExtractorParams {
  std::array<ConvParams, 3> layers;

  static ExtractorParams create(int in_channels, Rng& rng);
  ExtractorParams zeros_like() const;
  void collect(const std::string& prefix, TensorList& out);

  friend bool operator==(const ExtractorParams&, const ExtractorParams&) = default;
};

struct ExtractorTape {
  std::array<ConvCache, 3> layers;
};

Grid extract_features(const Grid& image, const ExtractorParams& params);
Grid extract_features(const Grid& image, const ExtractorParams& params, ExtractorTape& tape);
/// Adds parameter gradients into `grads`; returns the image gradient.
Grid extract_features_backward(const ExtractorTape& tape, const ExtractorParams& params,
                               const Grid& grad_features, ExtractorParams& grads);

// ------------------------------------------------------------ classifier

/// Toy classifier head: two 3×3 convs (relu, stride 1 then 2), dropout,
/// and a fully connected layer to the class logits.
struct ClassifierParams {
  ConvParams conv1;
  ConvParams conv2;
  ConvParams fc;

  static ClassifierParams create(int in_channels, int in_h, int in_w, int classes, Rng& rng);
  ClassifierParams zeros_like() const;
  void collect(const std::string& prefix, TensorList& out);

  friend bool operator==(const ClassifierParams&, const ClassifierParams&) = default;
};

struct ClassifierTape {
  ConvCache conv1;
  ConvCache conv2;
  ConvCache fc;
  double dropout_rate = 0.0;
  std::uint64_t dropout_seed = 0;
  bool training = false;
};

std::vector<double> classify(const Grid& features, const ClassifierParams& params,
                             ClassifierTape& tape);
Grid classify_backward(const ClassifierTape& tape, const ClassifierParams& params,
                       const std::vector<double>& grad_logits, ClassifierParams& grads);

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits
};

CrossEntropy softmax_cross_entropy(const std::vector<double>& logits, int label);

// ----------------------------------------------------------------- model

struct ModelState {
  ExtractorParams extractor;
  TransNetParams trans;
  DeblurParams deblur;
  LocParams loc;
  ClassifierParams classifier;
  AdamGroup adam;

  /// Every learnable tensor of the parts an experiment uses, in a fixed
  /// order with stable names.
  TensorList deblur_tensors();
  TensorList stn_tensors();
};

struct EpochRecord {
  int epoch = 0;
  double loss_rec = 0.0;
  double loss_dcp = 0.0;
  double loss_total = 0.0;
  double psnr_pred = 0.0;
  double psnr_hazy = 0.0;
  double accuracy = 0.0;
};

struct Metrics {
  std::vector<EpochRecord> records;

  /// Header plus one line per record with fixed formatting, so equal
  /// metrics give equal bytes.
  std::string to_csv() const;
};

struct TrainResult {
  ModelState model;
  Metrics metrics;
};

ModelState init_deblur_model(const TrainConfig& config);

/// Gradient accumulator with the layout of the self-supervised model.
struct DeblurModelGrads {
  ExtractorParams extractor;
  TransNetParams trans;
  DeblurParams deblur;

  explicit DeblurModelGrads(const ModelState& model);
  /// Same order and names as ModelState::deblur_tensors().
  TensorList tensors();
};

/// Self-supervised loss of one hazy image under `model`: shared extractor,
/// deblur branch, transmission branch, re-synthesis with the given A.
/// When `grads` is non-null the parameter gradients are added into it.
TotalLoss selfsup_loss(const ModelState& model, const Grid& hazy, const BackgroundLight& A,
                       const TrainConfig& config, DeblurModelGrads* grads = nullptr);

/// Self-supervised deblurring. The dataset's clear images are used for the
/// PSNR columns only; no gradient depends on them.
TrainResult train_selfsup_deblur(const TrainConfig& config);
TrainResult train_selfsup_deblur(const TrainConfig& config,
                                 const std::vector<UnderwaterSample>& dataset);

/// Deblur-branch prediction for one hazy image, as used in evaluation.
Grid predict_clear(const ModelState& model, const Grid& hazy);

/// Shape classification with an STN of the given mode between the shared
/// extractor and the classifier head. Trains and tests on distorted shapes;
/// the accuracy column is held-out accuracy. With `distort` false both
/// splits are undistorted.
TrainResult train_stn_classifier(StnMode mode, const TrainConfig& config, bool distort = true);

double evaluate_accuracy(const ModelState& model, StnMode mode,
                         const std::vector<ShapeSample>& samples);

}  // namespace seaclear
