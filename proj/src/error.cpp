#include "jumplab/error.hpp"

namespace jumplab {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::shape: return "shape";
        case ErrorKind::label: return "label";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::io: return "io";
        case ErrorKind::parse: return "parse";
        case ErrorKind::capacity: return "capacity";
        case ErrorKind::encoding: return "encoding";
    }
    return "unknown";
}

}  // namespace jumplab
