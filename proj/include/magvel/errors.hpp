#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace magvel {

/// Hermitian-symmetry violation of a spectral field claimed to be real.
class SymmetryError : public std::runtime_error {
public:
    explicit SymmetryError(const std::string& what) : std::runtime_error(what) {}
};

/// File-format or filesystem failure while reading/writing field files.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown by the strict reconstruction policy when the source carries energy
/// on a resonant mode: the mode equation has a vanishing left side there, so
/// no velocity coefficient can produce that source component.
class UnsolvableModeError : public std::runtime_error {
public:
    // Modes padded to three entries; only the first `dim` are meaningful.
    UnsolvableModeError(const std::string& what, int dim,
                        std::vector<std::array<int, 3>> modes)
        : std::runtime_error(what), dim_(dim), modes_(std::move(modes)) {}

    int dim() const { return dim_; }
    const std::vector<std::array<int, 3>>& modes() const { return modes_; }

private:
    int dim_;
    std::vector<std::array<int, 3>> modes_;
};

} // namespace magvel
