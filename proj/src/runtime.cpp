#include "pobs/runtime.hpp"

namespace pobs::runtime {

std::optional<int> ContainerHandle::host_port(int container_port) const {
    auto it = ports.find(container_port);
    if (it == ports.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::string normalize_image(const std::string& reference) {
    if (reference.find('@') != std::string::npos) {
        return reference;
    }
    const auto slash = reference.rfind('/');
    const auto colon = reference.rfind(':');
    if (colon == std::string::npos || (slash != std::string::npos && colon < slash)) {
        return reference + ":latest";
    }
    return reference;
}

} // namespace pobs::runtime
