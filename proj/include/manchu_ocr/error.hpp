#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace manchu_ocr {

enum class ErrorKind {
  UnknownToken,
  UnknownGlyph,
  TableFormat,
  InvalidText,
  InvalidRaster,
  EmptyTruth,
  IdMismatch,
  EmptyRun,
  BadWindow,
  BadConfig,
  NotBinary,
  EmptyPage,
  MissingGlyph,
  Spec,
  EmptySource,
  NoErrors,
  MissingPrediction,
  Io,
  Timeout,
  Transport,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownToken: return "UnknownToken";
    case ErrorKind::UnknownGlyph: return "UnknownGlyph";
    case ErrorKind::TableFormat: return "TableFormat";
    case ErrorKind::InvalidText: return "InvalidText";
    case ErrorKind::InvalidRaster: return "InvalidRaster";
    case ErrorKind::EmptyTruth: return "EmptyTruth";
    case ErrorKind::IdMismatch: return "IdMismatch";
    case ErrorKind::EmptyRun: return "EmptyRunError";
    case ErrorKind::BadWindow: return "BadWindow";
    case ErrorKind::BadConfig: return "ConfigError";
    case ErrorKind::NotBinary: return "NotBinary";
    case ErrorKind::EmptyPage: return "EmptyPage";
    case ErrorKind::MissingGlyph: return "MissingGlyph";
    case ErrorKind::Spec: return "SpecError";
    case ErrorKind::EmptySource: return "EmptySource";
    case ErrorKind::NoErrors: return "NoErrors";
    case ErrorKind::MissingPrediction: return "MissingPrediction";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::Transport: return "TransportError";
  }
  return "Error";
}

/// Base exception for every failure raised by the toolkit. The kind is
/// stable and machine-readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Transliteration failure at a given input position (token or codepoint index).
class PositionError : public Error {
 public:
  PositionError(ErrorKind kind, std::size_t position, const std::string& message)
      : Error(kind, message + " at position " + std::to_string(position)), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace manchu_ocr
