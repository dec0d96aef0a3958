/**
 * HTTP scorer service speaking the decoder wire protocol.
 *
 * POST /score  {"question", "prefix", "candidates"} -> {"log_probs"}
 * GET  /health -> base model id and plugged adapter digests
 *
 * Requests are handled sequentially per instance; scale out by running
 * more instances.
 */

import * as http from 'node:http';

import { LoraAdapter, adapterDigest } from './lora.js';
import { Model } from './model.js';
import { scoreCandidates } from './scoring.js';

export interface ScorerService {
  server: http.Server;
  port: number;
  close: () => Promise<void>;
}

function readBody(req: http.IncomingMessage): Promise<string> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    req.on('data', (c) => chunks.push(c));
    req.on('end', () => resolve(Buffer.concat(chunks).toString('utf-8')));
    req.on('error', reject);
  });
}

function sendJson(res: http.ServerResponse, status: number, body: unknown): void {
  const payload = JSON.stringify(body);
  res.writeHead(status, { 'content-type': 'application/json' });
  res.end(payload);
}

export function createScorerServer(model: Model, adapters: LoraAdapter[]): http.Server {
  model.plug(adapters);
  return http.createServer(async (req, res) => {
    try {
      if (req.method === 'GET' && req.url === '/health') {
        const adapterInfo: Record<string, string> = {};
        for (const a of adapters) adapterInfo[a.name] = adapterDigest(a);
        sendJson(res, 200, { status: 'ok', base_model: model.id, adapters: adapterInfo });
        return;
      }
      if (req.method === 'POST' && req.url === '/score') {
        let body: { question?: unknown; prefix?: unknown; candidates?: unknown };
        try {
          body = JSON.parse(await readBody(req));
        } catch {
          sendJson(res, 400, { error: 'invalid JSON body' });
          return;
        }
        if (
          typeof body.question !== 'string' ||
          typeof body.prefix !== 'string' ||
          !Array.isArray(body.candidates) ||
          body.candidates.some((c) => typeof c !== 'string')
        ) {
          sendJson(res, 400, { error: 'need question, prefix, candidates[] as strings' });
          return;
        }
        const logProbs = scoreCandidates(
          model,
          body.question,
          body.prefix,
          body.candidates as string[],
        );
        sendJson(res, 200, { log_probs: logProbs });
        return;
      }
      sendJson(res, 404, { error: `no route ${req.method} ${req.url}` });
    } catch (err) {
      sendJson(res, 500, { error: String(err) });
    }
  });
}

export function startScorerServer(
  model: Model,
  adapters: LoraAdapter[],
  port: number,
  host = '127.0.0.1',
): Promise<ScorerService> {
  const server = createScorerServer(model, adapters);
  return new Promise((resolve, reject) => {
    server.once('error', reject);
    server.listen(port, host, () => {
      const address = server.address();
      const boundPort = typeof address === 'object' && address ? address.port : port;
      resolve({
        server,
        port: boundPort,
        close: () => new Promise<void>((done) => server.close(() => done())),
      });
    });
  });
}
