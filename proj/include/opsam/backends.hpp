#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "opsam/cpg.hpp"
#include "opsam/tensor.hpp"

namespace opsam {

enum class PromptLabel { negative = 0, positive = 1 };

struct PromptPoint {
    int x = 0; // column
    int y = 0; // row
    PromptLabel label = PromptLabel::positive;

    bool operator==(const PromptPoint&) const = default;
};

using PromptList = std::vector<PromptPoint>;

struct SegmenterResult {
    MaskGrid mask; // image resolution
    double predicted_iou = 0.0;
};

struct EncoderCapabilities {
    int patch = 0;
    int input_size = 0;
    int dim = 0;
    std::vector<EmbeddingKind> kinds;
    int segmenter_input = 0;
    std::string value_source; // where value embeddings are tapped, when the backend says
};

/// Embeddings for one image plus where its patch lattice lies over the pixels.
struct EncodedImage {
    PatchLayout layout;
    EmbeddingSet embeddings;
};

/// Feature encoder. Implementations must return identical output for identical
/// images and be safe to call concurrently.
class EncoderBackend {
  public:
    virtual ~EncoderBackend() = default;
    virtual EncoderCapabilities capabilities() const = 0;
    virtual EncodedImage encode(const ImageRGB& image, std::span<const EmbeddingKind> kinds) const = 0;
};

/// One query image's interactive segmentation state; used sequentially.
class SegmenterSession {
  public:
    virtual ~SegmenterSession() = default;
    virtual SegmenterResult predict(const PromptList& prompts) = 0;
};

/// Promptable segmenter. Sessions for distinct queries may run concurrently.
class SegmenterBackend {
  public:
    virtual ~SegmenterBackend() = default;
    virtual std::unique_ptr<SegmenterSession> open_session(const ImageRGB& image, std::string_view session_id) const = 0;
};

} // namespace opsam
