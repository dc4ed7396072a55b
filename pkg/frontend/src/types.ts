/** Shapes of the scoring-service JSON bodies the console consumes. */

export interface FeatureMeta {
  name: string;
  unit: string;
  kind: "continuous" | "binary";
}

export interface ModelMeta {
  format_version: number;
  tasks: string[];
  features: FeatureMeta[];
  best_threshold?: number;
  best_threshold_margin?: number;
  calibration?: string;
  training?: Record<string, unknown>;
  importance?: { feature: string; value: number }[];
}

export interface Attribution {
  feature: string;
  value: number;
}

export interface PredictResponse {
  probability?: number;
  probability_raw?: number;
  margin?: number;
  calibrated?: boolean;
  best_threshold?: number | null;
  threshold_flag?: boolean | null;
  attributions?: Attribution[];
  attribution_base?: number;
  expected_days?: number;
  days_raw?: number;
  days_clamped?: boolean;
}

/** A what-if element is either a prediction or an inline error. */
export type WhatifElement = PredictResponse & { error?: string };

export interface PredictRequest {
  features: Record<string, number>;
  calibrated?: boolean;
}

export interface WhatifRequest {
  base: PredictRequest;
  overrides: Record<string, number | null>[];
}
