#pragma once

// Network transport for the ingest cache. Kept out of cryptoprem.hpp so that
// only programs that really fetch over HTTP pull in cpp-httplib.

#include <cstdlib>
#include <string>

#include <httplib.h>

#include "cryptoprem/error.hpp"
#include "cryptoprem/ingest.hpp"

namespace cryptoprem::ingest {

/// Environment variable holding the API key sent with every request.
inline constexpr const char* kApiKeyEnv = "CRYPTOPREM_API_KEY";

/// GET over http(s). Locators that are not URLs fall through to the file
/// transport so a config can mix recorded fixtures with live endpoints.
class HttpTransport : public Transport {
public:
    explicit HttpTransport(std::filesystem::path file_root = {},
                           std::string key_header = "X-API-Key")
        : files_(std::move(file_root)), key_header_(std::move(key_header)) {
        if (const char* key = std::getenv(kApiKeyEnv)) api_key_ = key;
    }

    std::string get(const std::string& locator) override {
        const auto scheme_end = locator.find("://");
        if (scheme_end == std::string::npos) return files_.get(locator);
        const auto path_start = locator.find('/', scheme_end + 3);
        const std::string host = locator.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : locator.substr(path_start);

        httplib::Client client(host);
        client.set_follow_location(true);
        client.set_connection_timeout(10);
        client.set_read_timeout(60);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace(key_header_, api_key_);
        auto res = client.Get(path, headers);
        if (!res) {
            throw DataError("source unreachable: " + locator + " (" +
                            httplib::to_string(res.error()) + ")");
        }
        if (res->status != 200) {
            throw DataError("source " + locator + " returned HTTP " + std::to_string(res->status));
        }
        return res->body;
    }

private:
    FileTransport files_;
    std::string key_header_;
    std::string api_key_;
};

}  // namespace cryptoprem::ingest
