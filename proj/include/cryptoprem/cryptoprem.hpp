#pragma once

#include "cryptoprem/error.hpp"
#include "cryptoprem/date.hpp"
#include "cryptoprem/csv.hpp"
#include "cryptoprem/panel.hpp"
#include "cryptoprem/ols.hpp"
#include "cryptoprem/ingest.hpp"
#include "cryptoprem/factors.hpp"
#include "cryptoprem/latent_pca.hpp"
#include "cryptoprem/premia.hpp"
#include "cryptoprem/three_pass.hpp"
#include "cryptoprem/fama_macbeth.hpp"
#include "cryptoprem/bootstrap.hpp"
#include "cryptoprem/report.hpp"
#include "cryptoprem/config.hpp"
#include "cryptoprem/pipeline.hpp"
#include "cryptoprem/simulate.hpp"
