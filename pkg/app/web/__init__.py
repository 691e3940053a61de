# HTTP-сервис мониторинга
