#pragma once

#include <stdexcept>
#include <string>

namespace splice {

// Base class for every error this toolkit raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// JPEG stream uses a feature outside the baseline-sequential subset
// (progressive, arithmetic coding, 12-bit precision, >4 components).
class UnsupportedFormat : public Error { public: using Error::Error; };

// Malformed JPEG stream: bad marker sequence, truncated entropy data,
// invalid Huffman code.
class CorruptStream : public Error { public: using Error::Error; };

// Scalar argument outside its documented range (e.g. quality factor).
class RangeError : public Error { public: using Error::Error; };

// Tensor/layer geometry disagreement.
class ShapeMismatch : public Error { public: using Error::Error; };

// Batch statistics requested on a batch of fewer than 2 samples.
class DegenerateBatch : public Error { public: using Error::Error; };

// Coefficient image with no coded blocks.
class EmptyImage : public Error { public: using Error::Error; };

// Object mask with no nonzero pixels (possibly after a transform).
class EmptyMask : public Error { public: using Error::Error; };

// Transformed object cannot be placed inside the target image.
class PasteOutOfBounds : public Error { public: using Error::Error; };

// Filesystem failure while reading or writing artifacts.
class IoError : public Error { public: using Error::Error; };

// Source corpus too small for the requested dataset size.
class InsufficientCorpus : public Error { public: using Error::Error; };

// Inconsistent model configuration (adapter dims, channel plan, ...).
class ConfigError : public Error { public: using Error::Error; };

// Adapter requires a sidecar embedding that was not supplied.
class MissingEmbedding : public Error { public: using Error::Error; };

// Checkpoint or cache file failed validation on load.
class LoadError : public Error { public: using Error::Error; };

// Dataset split would leave a partition with fewer than 2 samples per class.
class TooSmall : public Error { public: using Error::Error; };

// Training loss became NaN/Inf.
class NonFinite : public Error { public: using Error::Error; };

} // namespace splice
